"""Galerkin-truncated time integration of the stochastic Euler/Navier-Stokes
system with transport-type multiplicative noise.

Ito form        du = [-P(u.grad u) - nu A u + 1/2 sum_i (P G_i)^2 u] dt
                     + sum_i (P G_i u) dW^i
Stratonovich    du = [-P(u.grad u) - nu A u] dt + sum_i (P G_i u) o dW^i

with G_i either transport by xi_i or transport+stretching.  Every operator
output is projected back to the truncation band n after each full stage, so
the integrated system is the literal finite-dimensional SDE on the band-n
coefficient cube (not an approximation of the PDE), and discrete energy
identities can be checked exactly in law.

Two equivalent evaluation paths exist for the quadratic terms: a direct
convolution path (``fast=False``, the reference semantics) and a padded-grid
collocation path whose grid is large enough that no aliased mode lands inside
the retained band; they agree to roundoff and the fast path is the default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import ConfigError, ContractViolationError, SchemeMismatchError
from .estimates import NOISE_KINDS
from .fields import (
    VOLUME,
    FieldSpec,
    FourierField,
    _symmetrized,
    inner_l2,
    multi_indices,
    random_field,
    wavenumber_grids,
)
from .norms import winf_norm
from .operators import (
    b_op,
    galerkin_project,
    leray,
    nonlinear,
    require_solenoidal,
    stokes_pow,
    transport,
)
from .utils import fmt17, substream

SCHEMES = ("ito_em", "strato_heun", "rk4")

HARD_CAP_NORM = 1e12  # blow-up detection threshold on ||u||_{W^{m,2}}

TRAJECTORY_CSV_HEADER = "step,time,l2_energy,sobolev_m_energy,w1inf,blowup_integral,tau_hit"

__all__ = [
    "SCHEMES",
    "HARD_CAP_NORM",
    "TRAJECTORY_CSV_HEADER",
    "NoiseEnsemble",
    "BrownianPath",
    "SolverConfig",
    "TrajectoryRecord",
    "apply_noise_op",
    "ito_drift",
    "step_ito_em",
    "step_strato_heun",
    "step_rk4",
    "simulate",
    "energy_balance_residual",
]


# ---------------------------------------------------------------------------
# noise ensemble and Brownian paths


@dataclass(frozen=True)
class NoiseEnsemble:
    """Finite family (xi_i) of divergence-free noise fields of one kind."""

    kind: str
    modes: tuple[FourierField, ...]

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "modes", tuple(self.modes))
        for i, xi in enumerate(self.modes):
            if not xi.is_solenoidal():
                raise ContractViolationError(f"noise mode {i} is not divergence-free")

    @property
    def count(self) -> int:
        return len(self.modes)

    @classmethod
    def build(
        cls,
        kind: str,
        count: int,
        band: int = 2,
        decay: float = 1.0,
        seed: int = 0,
        amplitude: float = 1.0,
        weight_exponent: float = 1.0,
    ) -> "NoiseEnsemble":
        """Random ensemble with amplitude weights c_i = i^{-weight_exponent}."""
        count = int(count)
        if count < 0:
            raise ConfigError("noise mode count must be nonnegative")
        modes = []
        for i in range(count):
            raw = random_field(FieldSpec(band, decay, True), substream(seed, 31, i))
            modes.append(raw * (float(amplitude) * float(i + 1) ** -float(weight_exponent)))
        return cls(kind, tuple(modes))


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Seeded increments dW^i_n ~ N(0, dt), one row per step.

    ``refine`` halves dt by splitting every increment into two conditionally
    Gaussian halves (midpoint variance dt/4) whose floating point sum is
    exactly the original increment, so refined paths drive the same noise.
    """

    seed: int
    dt: float
    increments: np.ndarray  # (steps, count)
    level: int = 0
    stream: tuple[int, ...] = ()  # extra substream tag, for independent path ensembles

    def __post_init__(self):
        inc = np.array(self.increments, dtype=np.float64, order="C")
        if inc.ndim != 2:
            raise ConfigError("increments must be a (steps, count) array")
        if self.dt < 0:
            raise ConfigError("dt must be nonnegative")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "stream", tuple(int(t) for t in self.stream))

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def count(self) -> int:
        return self.increments.shape[1]

    @classmethod
    def generate(
        cls, seed: int, steps: int, count: int, dt: float, stream: tuple[int, ...] = ()
    ) -> "BrownianPath":
        stream = tuple(int(t) for t in stream)
        rng = substream(seed, 21, *stream)
        inc = rng.normal(0.0, math.sqrt(dt), size=(int(steps), int(count)))
        return cls(int(seed), float(dt), inc, 0, stream)

    def refine(self) -> "BrownianPath":
        """Halve dt via the Brownian bridge: each increment w splits into
        conditionally independent halves w/2 +- mid, mid ~ Normal(0, dt/4).

        Pairwise sums of the halves reproduce this path bit-for-bit on almost
        every entry; the nudge below absorbs the rounding error of the split
        into whichever half can represent it.  Entries whose halves dwarf the
        parent increment (|mid| >> |w|) live on a coarser ulp lattice than w
        and cannot reconstruct it exactly in principle; they are left with a
        sub-ulp-of-|halves| gap rather than distorting the bridge law, which
        the energy-identity and strong-convergence checks depend on.
        """
        w = self.increments
        rng = substream(self.seed, 22, self.level + 1, *self.stream)
        mid = rng.normal(0.0, math.sqrt(self.dt / 4.0), size=w.shape)
        h1 = 0.5 * w + mid
        h2 = w - h1
        for _ in range(2):
            s = h1 + h2
            err = s - w  # exact: s lands within one ulp of w (Sterbenz)
            bad = err != 0.0
            if not bad.any():
                break
            into_h2 = bad & (np.abs(h2) <= np.abs(h1))
            h2 = np.where(into_h2, h2 - err, h2)
            h1 = np.where(bad & ~into_h2, h1 - err, h1)
        fine = np.empty((2 * w.shape[0], w.shape[1]))
        fine[0::2] = h1
        fine[1::2] = h2
        return BrownianPath(self.seed, self.dt / 2.0, fine, self.level + 1, self.stream)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one Galerkin SDE run.

    ``hit_threshold`` (M) arms the first-hitting stop on the running
    ||u||^2_{W^{m-3,2}} monitor; ``blowup_budget`` stops once the
    integral of ||u||_{W^{1,inf}} exceeds it.  ``fast`` selects the padded
    collocation evaluator; the direct convolution path is the reference.
    """

    n: int
    m: int
    nu: float
    dt: float
    steps: int
    scheme: str
    ensemble: NoiseEnsemble | None = None
    hit_threshold: float | None = None
    blowup_budget: float | None = None
    include_nonlinear: bool = True
    fast: bool = True
    debug_checks: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("truncation band n must be >= 1")
        if self.m < 0:
            raise ConfigError("Sobolev order m must be >= 0")
        if self.nu < 0:
            raise ConfigError("viscosity must be nonnegative")
        # dt = 0 is allowed so the trivial fixed-point behaviour of the step
        # operators is expressible; simulate then records a constant state
        if self.dt < 0:
            raise ConfigError("dt must be nonnegative")
        if self.steps < 0:
            raise ConfigError("steps must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.hit_threshold is not None and not self.hit_threshold > 0:
            raise ConfigError("hit_threshold must be positive when set")
        if self.blowup_budget is not None and not self.blowup_budget > 0:
            raise ConfigError("blowup_budget must be positive when set")
        if self.scheme == "rk4" and self.active_noise:
            raise ConfigError("rk4 is the deterministic variant; it cannot carry a noise ensemble")

    @property
    def active_noise(self) -> bool:
        return self.ensemble is not None and self.ensemble.count > 0

    @property
    def tau_order(self) -> int:
        """Sobolev order of the first-hitting monitor (m-3, floored at 0)."""
        return max(self.m - 3, 0)


# ---------------------------------------------------------------------------
# operator evaluation: direct and padded-collocation paths


class _DirectEval:
    """Reference semantics: exact convolution, then project and truncate."""

    def __init__(self, band: int, ensemble: NoiseEnsemble | None):
        self.band = band
        self.ensemble = ensemble

    def terms(self, u, want_nl, want_noise):
        nl = galerkin_project(nonlinear(u), self.band) if want_nl else None
        bs = []
        if want_noise and self.ensemble is not None:
            bs = [
                apply_noise_op(self.ensemble, i, u, band=self.band)
                for i in range(self.ensemble.count)
            ]
        return nl, bs

    def noise_second(self, bs):
        return [
            apply_noise_op(self.ensemble, i, b, band=self.band) for i, b in enumerate(bs)
        ]


class _Workspace:
    """Batched padded-grid collocation products for one (band, ensemble).

    The grid length L >= max(3n+1, s+2n+1) (s the largest noise band, padded
    to an FFT-friendly size) guarantees that every aliased image of a
    quadratic product lands outside the retained band, so values agree with
    the direct convolution path up to floating point summation order.
    """

    def __init__(self, band: int, ensemble: NoiseEnsemble | None):
        self.band = band
        modes = ensemble.modes if ensemble is not None else ()
        self.kind = ensemble.kind if ensemble is not None else "transport"
        s = max((xi.band for xi in modes), default=0)
        self.L = int(scipy.fft.next_fast_len(max(3 * band + 1, s + 2 * band + 1)))
        k1, k2, k3, _ = wavenumber_grids(band)
        self._ik = np.stack([1j * k1, 1j * k2, 1j * k3])
        self._idx_cache: dict[int, np.ndarray] = {}
        self._xi_grids = []
        self._dxi_grids = []
        for xi in modes:
            cubes = [xi.data]
            if self.kind == "transport_stretching":
                x1, x2, x3, _ = wavenumber_grids(xi.band)
                for kax in (x1, x2, x3):
                    cubes.append(xi.data * (1j * kax))
            grids = self._to_grids(np.concatenate(cubes, axis=0), xi.band)
            self._xi_grids.append(grids[:3])
            if self.kind == "transport_stretching":
                # [l, j] = collocation values of d_l xi^j
                self._dxi_grids.append(grids[3:].reshape(3, 3, self.L, self.L, self.L))
            else:
                self._dxi_grids.append(None)

    def _idx(self, band: int) -> np.ndarray:
        got = self._idx_cache.get(band)
        if got is None:
            got = np.arange(-band, band + 1) % self.L
            self._idx_cache[band] = got
        return got

    def _to_grids(self, cubes: np.ndarray, band: int) -> np.ndarray:
        """Coefficient cubes (B, 2b+1, ..) -> collocation values (B, L, L, L)."""
        idx = self._idx(band)
        buf = np.zeros((cubes.shape[0], self.L, self.L, self.L), dtype=np.complex128)
        buf[np.ix_(np.arange(cubes.shape[0]), idx, idx, idx)] = cubes
        return scipy.fft.ifftn(buf, axes=(1, 2, 3)) * float(self.L**3)

    def _bundle(self, u: FourierField) -> tuple[np.ndarray, np.ndarray]:
        """Collocation values of u and of every d_l u^j in one batched pass."""
        cubes = np.concatenate([u.data] + [u.data * self._ik[l] for l in range(3)], axis=0)
        grids = self._to_grids(cubes, self.band)
        return grids[:3], grids[3:].reshape(3, 3, self.L, self.L, self.L)

    def _fields(self, prods: np.ndarray) -> list[FourierField]:
        """Batched grid products (3K, L, L, L) -> K projected band-n fields."""
        spec = scipy.fft.fftn(prods, axes=(1, 2, 3)) * (1.0 / self.L**3)
        idx = self._idx(self.band)
        ext = spec[np.ix_(np.arange(prods.shape[0]), idx, idx, idx)]
        out = []
        for t in range(ext.shape[0] // 3):
            cube = _symmetrized(ext[3 * t : 3 * t + 3])
            out.append(leray(FourierField(self.band, cube)))
        return out

    def _noise_product(self, i: int, u_vals: np.ndarray, du_vals: np.ndarray) -> np.ndarray:
        out = np.einsum("lxyz,ljxyz->jxyz", self._xi_grids[i], du_vals)
        if self._dxi_grids[i] is not None:
            out = out + np.einsum("jxyz,ljxyz->lxyz", u_vals, self._dxi_grids[i])
        return out

    def terms(self, u, want_nl, want_noise):
        count = len(self._xi_grids) if want_noise else 0
        if not want_nl and count == 0:
            return None, []
        u_vals, du_vals = self._bundle(u)
        prods = []
        if want_nl:
            prods.append(np.einsum("lxyz,ljxyz->jxyz", u_vals, du_vals))
        for i in range(count):
            prods.append(self._noise_product(i, u_vals, du_vals))
        fields = self._fields(np.concatenate(prods, axis=0))
        if want_nl:
            return fields[0], fields[1:]
        return None, fields

    def noise_second(self, bs):
        if not bs:
            return []
        cubes = []
        for b in bs:
            cubes.append(b.data)
            for l in range(3):
                cubes.append(b.data * self._ik[l])
        grids = self._to_grids(np.concatenate(cubes, axis=0), self.band)
        L = self.L
        prods = []
        for i in range(len(bs)):
            u_vals = grids[12 * i : 12 * i + 3]
            du_vals = grids[12 * i + 3 : 12 * i + 12].reshape(3, 3, L, L, L)
            prods.append(self._noise_product(i, u_vals, du_vals))
        return self._fields(np.concatenate(prods, axis=0))


@lru_cache(maxsize=8)
def _cached_workspace(band: int, ensemble: NoiseEnsemble | None) -> _Workspace:
    return _Workspace(band, ensemble)


def _evaluator(cfg: SolverConfig):
    if cfg.fast:
        return _cached_workspace(cfg.n, cfg.ensemble)
    return _DirectEval(cfg.n, cfg.ensemble)


# ---------------------------------------------------------------------------
# drift, noise application, and single steps


def apply_noise_op(
    ensemble: NoiseEnsemble, i: int, u: FourierField, band: int | None = None
) -> FourierField:
    """P G_i u truncated to ``band`` (default: the band of u)."""
    i = int(i)
    if not 0 <= i < ensemble.count:
        raise IndexError(f"noise index {i} out of range for {ensemble.count} modes")
    require_solenoidal(u, "apply_noise_op")
    op = transport if ensemble.kind == "transport" else b_op
    out = leray(op(ensemble.modes[i], u))
    return galerkin_project(out, u.band if band is None else int(band))


def _at_band(u: FourierField, n: int) -> FourierField:
    if u.band == n:
        return u
    if u.band < n:
        return FourierField(n, u._embedded(n))
    raise ConfigError(f"field band {u.band} exceeds the truncation band {n}")


def _drift_terms(u, cfg, ev, *, corrector, want_noise):
    """(drift, noise terms): drift = -P(u.grad u) - nu A u (+ Ito corrector)."""
    nl, bs = ev.terms(u, cfg.include_nonlinear, want_noise and cfg.active_noise)
    acc = np.zeros_like(u.data)
    if nl is not None:
        acc -= nl.data
    if cfg.nu != 0.0:
        acc -= cfg.nu * stokes_pow(u, 1.0).data
    if corrector and bs:
        for second in ev.noise_second(bs):
            acc += 0.5 * second.data
    return FourierField(cfg.n, acc), bs


def ito_drift(u: FourierField, cfg: SolverConfig) -> FourierField:
    """-nonlinear(u) - nu A u + 1/2 sum_i (P G_i)(P G_i u), truncated to n."""
    require_solenoidal(u, "ito_drift")
    u = _at_band(u, cfg.n)
    drift, _ = _drift_terms(u, cfg, _evaluator(cfg), corrector=True, want_noise=True)
    return drift


def _increments_for(cfg: SolverConfig, step_increments) -> np.ndarray:
    dw = np.zeros(0) if step_increments is None else np.asarray(step_increments, dtype=np.float64).reshape(-1)
    want = cfg.ensemble.count if cfg.active_noise else 0
    if dw.size != want:
        raise ConfigError(f"expected {want} noise increments, got {dw.size}")
    return dw


def _step_ito_em(u, dw, cfg, ev):
    drift, bs = _drift_terms(u, cfg, ev, corrector=True, want_noise=True)
    acc = u.data + cfg.dt * drift.data
    for i, b in enumerate(bs):
        acc += dw[i] * b.data
    return FourierField(cfg.n, acc), drift, bs


def _step_strato_heun(u, dw, cfg, ev):
    a0, b0 = _drift_terms(u, cfg, ev, corrector=False, want_noise=True)
    acc = u.data + cfg.dt * a0.data
    for i, b in enumerate(b0):
        acc += dw[i] * b.data
    pred = FourierField(cfg.n, acc)
    a1, b1 = _drift_terms(pred, cfg, ev, corrector=False, want_noise=True)
    acc = u.data + (0.5 * cfg.dt) * (a0.data + a1.data)
    for i in range(len(b0)):
        acc += (0.5 * dw[i]) * (b0[i].data + b1[i].data)
    return FourierField(cfg.n, acc)


def _step_rk4(u, cfg, ev):
    def f(v):
        drift, _ = _drift_terms(v, cfg, ev, corrector=False, want_noise=False)
        return drift

    dt = cfg.dt
    k1 = f(u)
    k2 = f(FourierField(cfg.n, u.data + (0.5 * dt) * k1.data))
    k3 = f(FourierField(cfg.n, u.data + (0.5 * dt) * k2.data))
    k4 = f(FourierField(cfg.n, u.data + dt * k3.data))
    acc = u.data + (dt / 6.0) * (k1.data + 2.0 * k2.data + 2.0 * k3.data + k4.data)
    return FourierField(cfg.n, acc)


def step_ito_em(u: FourierField, step_increments, cfg: SolverConfig) -> FourierField:
    """One Euler-Maruyama step of the Ito form (corrector included in drift)."""
    require_solenoidal(u, "step_ito_em")
    u = _at_band(u, cfg.n)
    dw = _increments_for(cfg, step_increments)
    out, _, _ = _step_ito_em(u, dw, cfg, _evaluator(cfg))
    return out


def step_strato_heun(u: FourierField, step_increments, cfg: SolverConfig) -> FourierField:
    """One Heun (predictor/corrector) step of the Stratonovich form."""
    require_solenoidal(u, "step_strato_heun")
    u = _at_band(u, cfg.n)
    dw = _increments_for(cfg, step_increments)
    return _step_strato_heun(u, dw, cfg, _evaluator(cfg))


def step_rk4(u: FourierField, cfg: SolverConfig) -> FourierField:
    """One classical RK4 step of the deterministic drift (noise must be off)."""
    if cfg.active_noise:
        raise ConfigError("rk4 stepping is deterministic; disable the noise ensemble")
    require_solenoidal(u, "step_rk4")
    u = _at_band(u, cfg.n)
    return _step_rk4(u, cfg, _evaluator(cfg))


# ---------------------------------------------------------------------------
# monitors


@lru_cache(maxsize=64)
def _poly_multiplier(band: int, order: int) -> np.ndarray:
    """sum_{|alpha| <= order} k^{2 alpha}: the Parseval weight reproducing the
    literal Sobolev inner product sum_{|alpha| <= order} <D^a f, D^a f>."""
    k1, k2, k3, _ = wavenumber_grids(band)
    out = np.zeros_like(k1)
    for a1, a2, a3 in multi_indices(order):
        out = out + k1 ** (2 * a1) * k2 ** (2 * a2) * k3 ** (2 * a3)
    out.setflags(write=False)
    return out


def _energy(data: np.ndarray, mult: np.ndarray) -> float:
    mag = (data.real * data.real + data.imag * data.imag).sum(axis=0)
    return VOLUME * float(np.sum(mag * mult))


# ---------------------------------------------------------------------------
# trajectory record


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Monitors of one simulated trajectory.

    All series have one entry per recorded state (steps_taken + 1).  The
    energy pairing arrays hold, for each executed ito_em step n, the Ito
    integrands evaluated at the pre-step state: ``energy_drift_pairing[n]`` is
    2<F(u_n), u_n> + sum_i ||b_i(u_n)||^2 and ``energy_noise_pairing[n, i]``
    is 2<b_i(u_n), u_n>; they are empty for other schemes.
    """

    config: SolverConfig
    times: np.ndarray
    l2_energy: np.ndarray
    sobolev_m_energy: np.ndarray
    w1inf: np.ndarray
    blowup_integral: np.ndarray
    tau_energy: np.ndarray
    tau_order: int
    energy_drift_pairing: np.ndarray
    energy_noise_pairing: np.ndarray
    final_field: FourierField
    steps_taken: int
    stop_reason: str  # completed | tau_hit | blown_up | budget_exhausted
    hit_step: int | None

    @property
    def blown_up(self) -> bool:
        return self.stop_reason == "blown_up"

    def hitting_step(self, threshold: float) -> int | None:
        """First recorded step where the tau monitor reaches threshold plus
        its initial value; None when the trajectory never gets there."""
        if threshold <= 0:
            raise ValueError("threshold must be positive")
        level = threshold + self.tau_energy[0]
        idx = np.nonzero(self.tau_energy >= level)[0]
        return int(idx[0]) if idx.size else None

    def to_csv(self) -> str:
        hit = self.hit_step
        if hit is None and self.config.hit_threshold is not None:
            hit = self.hitting_step(self.config.hit_threshold)
        lines = [TRAJECTORY_CSV_HEADER]
        for r in range(self.steps_taken + 1):
            lines.append(
                ",".join(
                    [
                        str(r),
                        fmt17(self.times[r]),
                        fmt17(self.l2_energy[r]),
                        fmt17(self.sobolev_m_energy[r]),
                        fmt17(self.w1inf[r]),
                        fmt17(self.blowup_integral[r]),
                        "1" if hit is not None and r >= hit else "0",
                    ]
                )
            )
        return "\n".join(lines) + "\n"


def _read_only(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def simulate(cfg: SolverConfig, path: BrownianPath | None, u0: FourierField) -> TrajectoryRecord:
    """Iterate the configured scheme from u0, recording monitors every step.

    Deterministic given (cfg, path, u0).  Stops early on the first-hitting
    threshold when configured, on blow-up budget exhaustion, or when the
    W^{m,2} norm exceeds the hard cap (recorded, never a crash).
    """
    require_solenoidal(u0, "simulate")
    u = _at_band(u0, cfg.n)
    active = cfg.active_noise
    if active:
        if path is None:
            raise ConfigError("a Brownian path is required when the noise ensemble is nonempty")
        if path.count != cfg.ensemble.count:
            raise ConfigError(
                f"path carries {path.count} noise columns, ensemble has {cfg.ensemble.count}"
            )
        if path.steps < cfg.steps:
            raise ConfigError(f"path has {path.steps} steps, config asks for {cfg.steps}")
        if path.dt != cfg.dt:
            raise ConfigError("path step size does not match config dt")

    ev = _evaluator(cfg)
    mult_m = _poly_multiplier(cfg.n, cfg.m)
    mult_tau = _poly_multiplier(cfg.n, cfg.tau_order)
    mult_0 = _poly_multiplier(cfg.n, 0)
    cap_sq = HARD_CAP_NORM**2

    times = [0.0]
    l2 = [_energy(u.data, mult_0)]
    sob = [_energy(u.data, mult_m)]
    tau = [_energy(u.data, mult_tau)]
    w1 = [winf_norm(u, 1)]
    blow = [0.0]
    drift_pair: list[float] = []
    noise_pair: list[list[float]] = []
    ito = cfg.scheme == "ito_em"
    hit_step = None
    stop_reason = "completed"
    empty = np.zeros(0)

    for n_step in range(cfg.steps):
        dw = path.increments[n_step] if active else empty
        if ito:
            u_next, drift, bs = _step_ito_em(u, dw, cfg, ev)
            pairing = 2.0 * inner_l2(drift, u)
            row = []
            for b in bs:
                pairing += inner_l2(b, b)
                row.append(2.0 * inner_l2(b, u))
            drift_pair.append(pairing)
            noise_pair.append(row)
        elif cfg.scheme == "strato_heun":
            u_next = _step_strato_heun(u, dw, cfg, ev)
        else:
            u_next = _step_rk4(u, cfg, ev)
        u = u_next
        if cfg.debug_checks:
            u.validate()
            require_solenoidal(u, "simulate step")

        times.append((n_step + 1) * cfg.dt)
        l2.append(_energy(u.data, mult_0))
        sob.append(_energy(u.data, mult_m))
        tau.append(_energy(u.data, mult_tau))
        w1.append(winf_norm(u, 1))
        blow.append(blow[-1] + 0.5 * cfg.dt * (w1[-2] + w1[-1]))

        if not math.isfinite(sob[-1]) or sob[-1] > cap_sq:
            stop_reason = "blown_up"
            break
        if cfg.hit_threshold is not None and tau[-1] >= cfg.hit_threshold + tau[0]:
            hit_step = n_step + 1
            stop_reason = "tau_hit"
            break
        if cfg.blowup_budget is not None and blow[-1] >= cfg.blowup_budget:
            stop_reason = "budget_exhausted"
            break

    count = cfg.ensemble.count if active else 0
    return TrajectoryRecord(
        config=cfg,
        times=_read_only(np.asarray(times)),
        l2_energy=_read_only(np.asarray(l2)),
        sobolev_m_energy=_read_only(np.asarray(sob)),
        w1inf=_read_only(np.asarray(w1)),
        blowup_integral=_read_only(np.asarray(blow)),
        tau_energy=_read_only(np.asarray(tau)),
        tau_order=cfg.tau_order,
        energy_drift_pairing=_read_only(np.asarray(drift_pair)),
        energy_noise_pairing=_read_only(np.asarray(noise_pair).reshape(len(noise_pair), count)),
        final_field=u,
        steps_taken=len(times) - 1,
        stop_reason=stop_reason,
        hit_step=hit_step,
    )


def energy_balance_residual(
    record: TrajectoryRecord,
    path: BrownianPath | None,
    cfg: SolverConfig | None = None,
    signed: bool = False,
) -> float:
    """Discrete residual of the Ito L2 energy identity along one record:

        ||u_T||^2 - ||u_0||^2 - sum_n [2<F,u> + sum_i ||b_i||^2] dt
                              - sum_{n,i} 2<b_i,u> dW^i_n

    with every integrand evaluated at the pre-step state.  Returns the
    absolute value unless ``signed``; the ensemble mean of the signed residual
    vanishes within Monte Carlo error as dt -> 0.
    """
    cfg = record.config if cfg is None else cfg
    if cfg.scheme != "ito_em" or record.config.scheme != "ito_em":
        raise SchemeMismatchError("energy balance residual is defined for ito_em records")
    ns = record.steps_taken
    total = record.l2_energy[ns] - record.l2_energy[0]
    total -= cfg.dt * float(np.sum(record.energy_drift_pairing[:ns]))
    if record.energy_noise_pairing.shape[1]:
        if path is None:
            raise ConfigError("the driving path is required for the stochastic term")
        inc = path.increments[:ns]
        if inc.shape != record.energy_noise_pairing.shape:
            raise ConfigError("path shape does not match the recorded pairings")
        total -= float(np.sum(record.energy_noise_pairing * inc))
    return total if signed else abs(total)
