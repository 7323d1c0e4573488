"""Spectral operators: Leray projection, Stokes powers, transport and stretching.

All operators act coefficientwise or by exact convolution on band-limited
fields; none of them truncates.  Galerkin truncation is a separate explicit
operation so that operator identities hold exactly before any cutoff.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolationError
from .fields import (
    FourierField,
    MultiIndex,
    _conv_scalar,
    _symmetrized,
    derivative,
    multiply,
    wavenumber_grids,
)

__all__ = [
    "leray",
    "stokes_pow",
    "transport",
    "stretch",
    "stretch_adjoint",
    "b_op",
    "nonlinear",
    "galerkin_project",
    "stretch_transport_commutator_rhs",
    "mixed_commutator_rhs",
]


def require_solenoidal(f: FourierField, who: str, tol: float = 1e-12) -> None:
    num, den = f.solenoidal_residual()
    if num > tol * max(den, 1e-300):
        raise ContractViolationError(
            f"{who} requires a divergence-free field (relative residual {num / max(den, 1e-300):.3e})"
        )


def leray(f: FourierField) -> FourierField:
    """Project each coefficient onto the plane orthogonal to its wave vector."""
    k1, k2, k3, ksq = wavenumber_grids(f.band)
    d = f.data
    dot = k1 * d[0] + k2 * d[1] + k3 * d[2]
    safe = np.where(ksq > 0, ksq, 1.0)
    coef = np.where(ksq > 0, dot / safe, 0.0)
    out = np.stack([d[0] - k1 * coef, d[1] - k2 * coef, d[2] - k3 * coef])
    n = f.band
    out[:, n, n, n] = 0.0
    return FourierField(f.band, out)


def stokes_pow(f: FourierField, s: float) -> FourierField:
    """Fractional Stokes power: multiply solenoidal coefficients by |k|^(2s)."""
    require_solenoidal(f, "stokes_pow")
    _, _, _, ksq = wavenumber_grids(f.band)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(ksq > 0, ksq ** float(s), 0.0)
    return FourierField(f.band, f.data * factor)


def _axis_derivative_data(f: FourierField, axis: int) -> np.ndarray:
    kk = wavenumber_grids(f.band)[axis]
    return f.data * (1j * kk)


def _conv_acc(out: np.ndarray, a: np.ndarray, b: np.ndarray) -> None:
    """out += full linear convolution a * b (direct shift-add, no truncation)."""
    if a.size > b.size:
        a, b = b, a
    sb = b.shape[0]
    for i1, i2, i3 in np.argwhere(a != 0):
        out[i1 : i1 + sb, i2 : i2 + sb, i3 : i3 + sb] += a[i1, i2, i3] * b


def _transport_acc(acc: np.ndarray, xi: FourierField, f: FourierField) -> None:
    for j in range(3):
        dfj = _axis_derivative_data(f, j)
        for c in range(3):
            _conv_acc(acc[c], xi.data[j], dfj[c])


def _stretch_acc(acc: np.ndarray, xi: FourierField, f: FourierField) -> None:
    for ell in range(3):
        kl = wavenumber_grids(xi.band)[ell]
        for j in range(3):
            dxi_lj = xi.data[j] * (1j * kl)  # d_ell xi^j
            _conv_acc(acc[ell], f.data[j], dxi_lj)


def _g_out(xi: FourierField, f: FourierField) -> np.ndarray:
    so = 2 * (xi.band + f.band) + 1
    return np.zeros((3, so, so, so), dtype=np.complex128)


def transport(xi: FourierField, f: FourierField) -> FourierField:
    """Advection along xi: sum_j xi^j d_j f, assembled by exact convolution."""
    acc = _g_out(xi, f)
    _transport_acc(acc, xi, f)
    return FourierField(xi.band + f.band, _symmetrized(acc))


def stretch(xi: FourierField, f: FourierField) -> FourierField:
    """Stretching term: component ell is sum_j f^j d_ell xi^j."""
    acc = _g_out(xi, f)
    _stretch_acc(acc, xi, f)
    return FourierField(xi.band + f.band, _symmetrized(acc))


def stretch_adjoint(xi: FourierField, g: FourierField) -> FourierField:
    """L2 adjoint of ``stretch(xi, .)``: component j is sum_ell (d_ell xi^j) g^ell."""
    acc = _g_out(xi, g)
    for j in range(3):
        for ell in range(3):
            kl = wavenumber_grids(xi.band)[ell]
            dxi_lj = xi.data[j] * (1j * kl)
            _conv_acc(acc[j], g.data[ell], dxi_lj)
    return FourierField(xi.band + g.band, _symmetrized(acc))


def b_op(xi: FourierField, f: FourierField) -> FourierField:
    """Transport plus stretching, fused into one accumulation pass."""
    acc = _g_out(xi, f)
    _transport_acc(acc, xi, f)
    _stretch_acc(acc, xi, f)
    return FourierField(xi.band + f.band, _symmetrized(acc))


def nonlinear(u: FourierField) -> FourierField:
    """Projected self-advection: leray(transport(u, u)) for solenoidal u."""
    require_solenoidal(u, "nonlinear")
    return leray(transport(u, u))


def galerkin_project(f: FourierField, n: int) -> FourierField:
    """Sharp spectral cutoff: drop every coefficient with |k|_inf > n."""
    n = int(n)
    if n < 0:
        raise ValueError("truncation band must be nonnegative")
    if n >= f.band:
        return f
    lo, hi = f.band - n, f.band + n + 1
    return FourierField(n, f.data[:, lo:hi, lo:hi, lo:hi].copy())


# ---------------------------------------------------------------------------
# explicit commutator right-hand sides (independent evaluations used by the
# identity battery; both are zeroth/first order in g because the second-order
# derivative terms cancel in the operator difference)


def stretch_transport_commutator_rhs(xi: FourierField, g: FourierField) -> FourierField:
    """Explicit form of the stretch/transport commutator applied to g.

    Component ell:  - sum_{j,k} xi^j g^k  d_j d_ell xi^k.
    """
    b_inner = xi.band + g.band
    so = 2 * (b_inner + xi.band) + 1
    acc = np.zeros((3, so, so, so), dtype=np.complex128)
    kg = wavenumber_grids(xi.band)
    for j in range(3):
        for k in range(3):
            inner = _conv_scalar(xi.data[j], g.data[k])
            for ell in range(3):
                d2 = xi.data[k] * (-(kg[j] * kg[ell]))  # d_j d_ell xi^k
                _conv_acc(acc[ell], inner, d2)
    return FourierField(b_inner + xi.band, _symmetrized(-acc))


def mixed_commutator_rhs(eta: FourierField, xi: FourierField, g: FourierField) -> FourierField:
    """Explicit first-order form of (B_eta L_xi - L_xi B_eta) g.

    Component ell:
        sum_{j,k}  eta^j (d_j xi^k)(d_k g^ell)
                 -  xi^k (d_k eta^j)(d_j g^ell)
                 -  xi^k g^j (d_k d_ell eta^j).
    """
    # first two groups are nested advections
    term1 = transport(transport(eta, xi), g)
    term2 = transport(transport(xi, eta), g)
    # third group needs second derivatives of eta against the product xi^k g^j
    b_inner = xi.band + g.band
    band_out = b_inner + eta.band
    so = 2 * band_out + 1
    acc = np.zeros((3, so, so, so), dtype=np.complex128)
    ke = wavenumber_grids(eta.band)
    for k in range(3):
        for j in range(3):
            inner = _conv_scalar(xi.data[k], g.data[j])
            for ell in range(3):
                d2 = eta.data[j] * (-(ke[k] * ke[ell]))  # d_k d_ell eta^j
                _conv_acc(acc[ell], inner, d2)
    term3 = FourierField(band_out, _symmetrized(acc))
    return term1 - term2 - term3
