"""Numerical verification of the closed noise estimates and operator identities.

The central objects are the paired quadratic forms

    lhs_sum   = <<G(Gf), f>>_m + <<Gf, Gf>>_m
    lhs_cross = <<Gf, f>>_m ** 2

for G either the projected transport operator or the projected
transport-stretching operator.  The sum exhibits the cancellation that closes
the energy estimates: its ratio against ||xi||_{W^{m+2,inf}}^2 <<f, f>>_m
stays bounded as the band of f grows, while the single term <<Gf, Gf>>_m
normalized the same way grows like the square of the band (one derivative is
lost without the cancellation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolationError
from .fields import (
    FieldSpec,
    FourierField,
    derivative,
    inner_l2,
    multi_index_binom,
    multi_index_leq,
    multi_index_order,
    multi_index_sub,
    multi_indices,
    random_field,
    wavenumber_grids,
)
from .norms import sobolev_inner, sobolev_norm, stokes_inner, winf_norm, wkinf_norm
from .operators import (
    b_op,
    galerkin_project,
    leray,
    mixed_commutator_rhs,
    nonlinear,
    stretch,
    stretch_transport_commutator_rhs,
    transport,
)
from .utils import fmt17, pmap, substream

NOISE_KINDS = ("transport", "transport_stretching")
NORM_KINDS = ("sobolev", "stokes")

__all__ = [
    "NOISE_KINDS",
    "NORM_KINDS",
    "EstimatePairValues",
    "EstimateReport",
    "IdentityCheck",
    "IdentityReport",
    "estimate_pair",
    "closure_scan",
    "closure_scan_multi",
    "identity_suite",
    "nonlinear_ratio",
    "reports_to_csv",
    "stokes_inner_expansion",
]


def _check_kinds(noise_kind: str, norm_kind: str) -> None:
    if noise_kind not in NOISE_KINDS:
        raise ValueError(f"unknown noise kind {noise_kind!r}")
    if norm_kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {norm_kind!r}")


def _norm_inner(norm_kind: str):
    return sobolev_inner if norm_kind == "sobolev" else stokes_inner


def _g_apply(xi: FourierField, f: FourierField, noise_kind: str) -> FourierField:
    op = transport if noise_kind == "transport" else b_op
    return leray(op(xi, f))


def _g_twice(xi: FourierField, f: FourierField, noise_kind: str) -> tuple[FourierField, FourierField]:
    """(Gf, G(Gf)); for the stretching kind G(Gf) is computed as P B(B f),
    which equals (P B)^2 f because P B = P B P."""
    if noise_kind == "transport":
        gf = leray(transport(xi, f))
        ggf = leray(transport(xi, gf))
    else:
        bf = b_op(xi, f)
        gf = leray(bf)
        ggf = leray(b_op(xi, bf))
    return gf, ggf


# ---------------------------------------------------------------------------
# single-pair estimate


@dataclass(frozen=True)
class EstimatePairValues:
    """Quadratic forms and normalized ratios for one (xi, f, m) triple."""

    noise_kind: str
    norm_kind: str
    m: int
    lhs_sum: float
    lhs_cross_sq: float
    ratio_sum: float
    ratio_cross: float
    ratio_cross_alt: float
    ratio_single: float


def estimate_pair(
    xi: FourierField,
    f: FourierField,
    m: int,
    noise_kind: str,
    norm_kind: str,
) -> EstimatePairValues:
    """Evaluate the closed-estimate quadratic forms on one field pair.

    ratio_cross uses the kind-appropriate sup-norm order (m+1 for the
    stretching kind, m for pure transport); ratio_cross_alt carries the other
    normalization so either reading of the cross bound can be checked.
    """
    _check_kinds(noise_kind, norm_kind)
    m = int(m)
    if m < 0:
        raise ValueError("Sobolev order must be nonnegative")
    if not xi.is_solenoidal():
        raise ContractViolationError("estimate_pair requires divergence-free xi")
    if not f.is_solenoidal():
        raise ContractViolationError("estimate_pair requires divergence-free f")

    gf, ggf = _g_twice(xi, f, noise_kind)
    # inner products only see modes inside f's band for the cross pairings,
    # so truncating the grown fields first changes nothing and is cheaper
    inner = _norm_inner(norm_kind)
    ff = inner(f, f, m)
    gfgf = inner(gf, gf, m)
    ggf_f = inner(galerkin_project(ggf, f.band), f, m)
    gf_f = inner(galerkin_project(gf, f.band), f, m)

    lhs_sum = ggf_f + gfgf
    lhs_cross_sq = gf_f**2

    xi_sum = wkinf_norm(xi, m + 2)
    order_main = m + 1 if noise_kind == "transport_stretching" else m
    order_alt = m if noise_kind == "transport_stretching" else m + 1
    xi_cross = wkinf_norm(xi, order_main)
    xi_cross_alt = wkinf_norm(xi, order_alt)

    tiny = 1e-300
    ratio_sum = lhs_sum / max(xi_sum**2 * ff, tiny)
    ratio_cross = lhs_cross_sq / max(xi_cross**2 * ff**2, tiny)
    ratio_cross_alt = lhs_cross_sq / max(xi_cross_alt**2 * ff**2, tiny)
    ratio_single = gfgf / max(xi_sum**2 * ff, tiny)
    return EstimatePairValues(
        noise_kind=noise_kind,
        norm_kind=norm_kind,
        m=m,
        lhs_sum=lhs_sum,
        lhs_cross_sq=lhs_cross_sq,
        ratio_sum=ratio_sum,
        ratio_cross=ratio_cross,
        ratio_cross_alt=ratio_cross_alt,
        ratio_single=ratio_single,
    )


# ---------------------------------------------------------------------------
# band scan


@dataclass(frozen=True)
class EstimateReport:
    """Closure-scan result: per-band maxima of the normalized ratios."""

    noise_kind: str
    norm_kind: str
    m: int
    trial_count: int
    rows: tuple[tuple[int, float, float], ...]  # (band, max_ratio_sum, max_ratio_single)

    def __post_init__(self):
        bands = [r[0] for r in self.rows]
        if bands != sorted(bands):
            raise ValueError("report rows must be sorted by band")
        if any(r[1] < 0 or r[2] < 0 for r in self.rows):
            raise ValueError("report ratios must be nonnegative")

    @property
    def max_ratio_sum(self) -> float:
        return max(r[1] for r in self.rows)

    @property
    def max_ratio_single(self) -> float:
        return max(r[2] for r in self.rows)

    def band_row(self, band: int) -> tuple[int, float, float]:
        for row in self.rows:
            if row[0] == band:
                return row
        raise KeyError(band)


CSV_HEADER = "band,m,noise_kind,norm_kind,trial_count,max_ratio_sum,max_ratio_single"


def reports_to_csv(reports: Sequence[EstimateReport]) -> str:
    lines = [CSV_HEADER]
    for rep in reports:
        for band, rsum, rsingle in rep.rows:
            lines.append(
                f"{band},{rep.m},{rep.noise_kind},{rep.norm_kind},"
                f"{rep.trial_count},{fmt17(rsum)},{fmt17(rsingle)}"
            )
    return "\n".join(lines) + "\n"


def closure_scan_multi(
    bands: Sequence[int],
    m_values: Sequence[int],
    noise_kind: str,
    norm_kinds: Sequence[str],
    trials: int,
    seed: int,
    xi_band: int = 2,
    xi_decay: float = 1.0,
    f_decay: float = 0.0,
    threads: int | None = None,
) -> list[EstimateReport]:
    """Closure scan sharing the heavy operator applications across m and norm.

    Field draws are keyed by (seed, band, trial) only, so the result for any
    single (m, norm_kind) equals an independent ``closure_scan`` call with the
    same seed.
    """
    if not norm_kinds:
        raise ValueError("at least one norm kind is required")
    for nk in norm_kinds:
        _check_kinds(noise_kind, nk)
    bands = [int(b) for b in bands]
    if bands != sorted(bands):
        raise ValueError("bands must be given in increasing order")
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    m_values = [int(m) for m in m_values]
    tiny = 1e-300

    def one_trial(task: tuple[int, int]) -> dict[tuple[int, str], tuple[float, float]]:
        band, trial = task
        xi = random_field(FieldSpec(xi_band, xi_decay, True), substream(seed, 11, band, trial))
        f = random_field(FieldSpec(band, f_decay, True), substream(seed, 12, band, trial))
        gf, ggf = _g_twice(xi, f, noise_kind)
        gf_c = galerkin_project(gf, band)
        ggf_c = galerkin_project(ggf, band)
        xi_norm = {m: wkinf_norm(xi, m + 2) for m in m_values}
        out: dict[tuple[int, str], tuple[float, float]] = {}
        for nk in norm_kinds:
            inner = _norm_inner(nk)
            for m in m_values:
                ff = inner(f, f, m)
                gfgf = inner(gf, gf, m)
                ggf_f = inner(ggf_c, f, m)
                denom = max(xi_norm[m] ** 2 * ff, tiny)
                out[(m, nk)] = (abs(ggf_f + gfgf) / denom, gfgf / denom)
        return out

    tasks = [(band, t) for band in bands for t in range(int(trials))]
    results = pmap(one_trial, tasks, threads)

    reports = []
    for m in m_values:
        for nk in norm_kinds:
            rows = []
            for band in bands:
                vals = [
                    results[i][(m, nk)]
                    for i, (b, _) in enumerate(tasks)
                    if b == band
                ]
                if not vals:
                    continue  # trials == 0: empty table, header-only CSV
                rows.append(
                    (band, max(v[0] for v in vals), max(v[1] for v in vals))
                )
            reports.append(
                EstimateReport(
                    noise_kind=noise_kind,
                    norm_kind=nk,
                    m=m,
                    trial_count=int(trials),
                    rows=tuple(rows),
                )
            )
    return reports


def closure_scan(
    bands: Sequence[int],
    m: int,
    noise_kind: str,
    norm_kind: str,
    trials: int,
    seed: int,
    **kwargs,
) -> EstimateReport:
    """Max normalized ratios over random (xi, f) pairs at each band."""
    return closure_scan_multi(bands, [m], noise_kind, [norm_kind], trials, seed, **kwargs)[0]


# ---------------------------------------------------------------------------
# nonlinear term control


def nonlinear_ratio(f: FourierField, m: int) -> float:
    """Self-advection pairing normalized by the product-rule bound.

    |<<P(u.grad u), u>>_m| / (2 ||u||_{W^{1,inf}} ||u||_{W^{m,2}}^2); finite by
    the standard tame estimate, meaningful for m >= 3.
    """
    m = int(m)
    if m < 3:
        raise ValueError("nonlinear_ratio requires m >= 3")
    num = abs(sobolev_inner(galerkin_project(nonlinear(f), f.band), f, m))
    w1 = winf_norm(f, 1)
    wm = sobolev_norm(f, m)
    den = (w1 * wm + wm * w1) * wm
    if den == 0.0:
        return 0.0
    return num / den


# ---------------------------------------------------------------------------
# identity battery


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    residual: float
    tol: float
    applicable: bool = True

    @property
    def passed(self) -> bool:
        return (not self.applicable) or self.residual <= self.tol


@dataclass(frozen=True)
class IdentityReport:
    checks: tuple[IdentityCheck, ...]
    tol: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def worst_residual(self) -> float:
        vals = [c.residual for c in self.checks if c.applicable]
        return max(vals) if vals else 0.0

    def by_name(self, name: str) -> IdentityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "tol": self.tol,
            "all_passed": self.all_passed,
            "checks": [
                {
                    "name": c.name,
                    "residual": c.residual,
                    "applicable": c.applicable,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }


def _field_residual(a: FourierField, b: FourierField) -> float:
    band = max(a.band, b.band)
    da = a._embedded(band)
    db = b._embedded(band)
    num = float(np.abs(da - db).max())
    den = max(float(np.abs(da).max()), float(np.abs(db).max()), 1e-300)
    return num / den


def _scalar_residual(a: float, b: float, scale: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), scale, 1e-300)


def _gradient_field(raw: FourierField) -> FourierField:
    """Pure gradient built from the first component of raw as a potential."""
    k1, k2, k3, _ = wavenumber_grids(raw.band)
    phi = raw.data[0]
    grad = np.stack([phi * (1j * k1), phi * (1j * k2), phi * (1j * k3)])
    return FourierField(raw.band, grad)


def stokes_inner_expansion(f: FourierField, g: FourierField, m: int) -> float:
    """Derivative-expansion evaluation of the Stokes pairing (independent of
    the multiplier route): even m pairs (m/2)-fold second derivatives along
    every axis tuple, odd m adds one matching first derivative."""
    m = int(m)
    if m < 0:
        raise ValueError("order must be nonnegative")
    if m == 0:
        return inner_l2(f, g)
    axes = ((1, 0, 0), (0, 1, 0), (0, 0, 1))

    def tuples(depth: int):
        if depth == 0:
            yield ()
            return
        for head in range(3):
            for rest in tuples(depth - 1):
                yield (head,) + rest

    def second_deriv(h: FourierField, ks: tuple[int, ...]) -> FourierField:
        alpha = [0, 0, 0]
        for k in ks:
            alpha[k] += 2
        return derivative(h, tuple(alpha))

    p = m // 2
    total = 0.0
    if m % 2 == 0:
        for kt in tuples(p):
            df = second_deriv(f, kt)
            for lt in tuples(p):
                total += inner_l2(df, second_deriv(g, lt))
    else:
        for j in range(3):
            fj = derivative(f, axes[j])
            gj = derivative(g, axes[j])
            for kt in tuples(p):
                df = second_deriv(fj, kt)
                for lt in tuples(p):
                    total += inner_l2(df, second_deriv(gj, lt))
    return total


def identity_suite(
    xi: FourierField,
    f: FourierField,
    tol: float = 1e-11,
    rng: np.random.Generator | None = None,
) -> IdentityReport:
    """Evaluate every operator/norm identity on (xi, f) plus auxiliary draws.

    Identities needing divergence-free inputs are gated: when xi (or f) is not
    solenoidal they are reported as inapplicable rather than failed.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    xi_sol = xi.is_solenoidal()
    f_sol = f.is_solenoidal()
    g1 = random_field(FieldSpec(f.band, 0.5, False), rng)
    g2 = random_field(FieldSpec(f.band, 0.5, False), rng)
    eta = random_field(FieldSpec(xi.band, 1.0, True), rng)
    grad = _gradient_field(random_field(FieldSpec(f.band, 1.0, False), rng))

    checks: list[IdentityCheck] = []

    def add(name, residual, applicable=True):
        checks.append(IdentityCheck(name, float(residual), tol, applicable))

    # Leray projector algebra
    pg1 = leray(g1)
    add("leray_idempotent", _field_residual(leray(pg1), pg1))
    scale = np.sqrt(inner_l2(g1, g1) * inner_l2(g2, g2))
    add(
        "leray_self_adjoint",
        _scalar_residual(inner_l2(pg1, g2), inner_l2(g1, leray(g2)), scale),
    )
    worst = 0.0
    for alpha in ((1, 0, 0), (0, 1, 0), (0, 0, 2), (1, 1, 0)):
        worst = max(worst, _field_residual(derivative(pg1, alpha), leray(derivative(g1, alpha))))
    add("leray_derivative_commute", worst)
    add(
        "leray_kills_gradients",
        leray(grad).max_abs() / max(grad.max_abs(), 1e-300),
    )

    # transport duality and cancellation (need solenoidal xi)
    lf = transport(xi, f)
    a = inner_l2(lf, g1)
    b = -inner_l2(f, transport(xi, g1))
    scale = np.sqrt(max(inner_l2(lf, lf), 0.0) * inner_l2(g1, g1))
    add("transport_adjoint", _scalar_residual(a, b, scale), applicable=xi_sol)
    cancel_scale = winf_norm(xi, 1) * inner_l2(f, f)
    add(
        "transport_cancellation",
        abs(inner_l2(lf, f)) / max(cancel_scale, 1e-300),
        applicable=xi_sol,
    )

    # projected stretching operator: gradient part of the argument is inert
    add(
        "projected_b_ignores_gradients",
        _field_residual(leray(b_op(xi, leray(g1))), leray(b_op(xi, g1))),
    )
    bf = b_op(xi, f)
    add(
        "projected_b_square",
        _field_residual(leray(b_op(xi, leray(bf))), leray(b_op(xi, bf))),
    )

    # Leibniz expansion of derivatives of B_xi f, orders |alpha| <= 3
    dxi = {gamma: derivative(xi, gamma) for gamma in multi_indices(3)}
    df = {ap: derivative(f, ap) for ap in multi_indices(3)}
    worst = 0.0
    for alpha in multi_indices(3):
        lhs = derivative(bf, alpha)
        rhs: FourierField | None = None
        for ap in multi_indices(multi_index_order(alpha)):
            if not multi_index_leq(ap, alpha):
                continue
            coef = multi_index_binom(alpha, ap)
            term = b_op(dxi[multi_index_sub(alpha, ap)], df[ap])
            term = term if coef == 1 else coef * term
            rhs = term if rhs is None else rhs + term
        worst = max(worst, _field_residual(lhs, rhs))
    add("leibniz_expansion", worst)

    # explicit commutator forms
    lhs = stretch(xi, transport(xi, g1)) - transport(xi, stretch(xi, g1))
    add(
        "stretch_transport_commutator",
        _field_residual(lhs, stretch_transport_commutator_rhs(xi, g1)),
    )
    lhs = b_op(eta, transport(xi, g1)) - transport(xi, b_op(eta, g1))
    add(
        "mixed_transport_commutator",
        _field_residual(lhs, mixed_commutator_rhs(eta, xi, g1)),
    )

    # Stokes pairing: multiplier route against the derivative expansion
    if f_sol:
        feta = eta if eta.is_solenoidal() else leray(eta)
        worst = 0.0
        for m in (1, 2, 3):
            mult = stokes_inner(f, feta, m)
            expd = stokes_inner_expansion(f, feta, m)
            scale = sobolev_norm(f, m) * sobolev_norm(feta, m)
            worst = max(worst, _scalar_residual(mult, expd, scale))
        add("stokes_inner_expansion", worst)
    else:
        add("stokes_inner_expansion", 0.0, applicable=False)

    return IdentityReport(checks=tuple(checks), tol=tol)
