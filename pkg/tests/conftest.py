"""Shared helpers and independent oracles for the test suite.

The oracles here deliberately avoid the package's own evaluation paths:
point values come from literal trigonometric sums, products are formed on
physical-space lattices and inverted with numpy's FFT, and noise operators
are assembled entry by entry from the per-mode formulas as dense matrices
over a real basis of the truncated mode set.
"""

import numpy as np

from torus_spde.fields import FourierField, VOLUME

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# gaps


def rel_gap(x: float, y: float) -> float:
    return abs(x - y) / max(abs(x), abs(y), 1e-300)


def field_gap(a: FourierField, b: FourierField) -> float:
    """Max coefficient difference between two fields, relative to their scale."""
    band = max(a.band, b.band)
    da, db = a._embedded(band), b._embedded(band)
    num = float(np.abs(da - db).max())
    den = max(float(np.abs(da).max()), float(np.abs(db).max()), 1e-300)
    return num / den


# ---------------------------------------------------------------------------
# physical-space oracles


def lattice(res: int) -> np.ndarray:
    """Uniform res^3 lattice on [0, 2pi)^3, shape (res, res, res, 3)."""
    x = TWO_PI * np.arange(res) / res
    return np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)


def direct_point_values(f: FourierField, pts: np.ndarray) -> np.ndarray:
    """Literal sum of f_k exp(i k.x) over the sparse mode map."""
    out = np.zeros(pts.shape[:-1] + (3,), dtype=np.complex128)
    for k, v in f.coeffs.items():
        phase = np.exp(1j * (pts @ np.asarray(k, dtype=np.float64)))
        out = out + phase[..., None] * np.asarray(v)
    return out


def dft_coefficients(values: np.ndarray, band: int) -> np.ndarray:
    """Mode coefficients on |k|_inf <= band recovered from lattice samples.

    values has shape (res, res, res, 3); the result is indexed
    [k1+band, k2+band, k3+band, component], matching FourierField.data up to
    the axis order. Exact (up to roundoff) when res >= 2*band+1.
    """
    res = values.shape[0]
    spect = np.fft.fftn(values, axes=(0, 1, 2)) / float(res**3)
    idx = np.arange(-band, band + 1) % res
    return spect[np.ix_(idx, idx, idx)]


def gradient_field(potential_source: FourierField) -> FourierField:
    """grad(phi) where phi is the first component of the given field."""
    n = potential_source.band
    r = np.arange(-n, n + 1)
    k1, k2, k3 = np.meshgrid(r, r, r, indexing="ij")
    phi = potential_source.data[0]
    return FourierField(
        n, np.stack([phi * (1j * k1), phi * (1j * k2), phi * (1j * k3)])
    )


# ---------------------------------------------------------------------------
# dense-matrix oracle over the real mode-pair basis
#
# A band-n real field is coordinatized by (Re f_k^c, Im f_k^c) over the
# lexicographically positive half-space; the mirror modes are implied by
# reality. Inner products are then diagonal: each (k, c) block contributes
# 2 * VOLUME * weight(k) * (x . y).


def half_space_keys(band: int) -> list[tuple[int, int, int]]:
    r = range(-band, band + 1)
    return [(a, b, c) for a in r for b in r for c in r if (a, b, c) > (0, 0, 0)]


def field_to_vec(f: FourierField, keys) -> np.ndarray:
    out = np.empty(6 * len(keys))
    for j, k in enumerate(keys):
        v = f.coeff(k)
        out[6 * j + 0 : 6 * j + 6 : 2] = v.real
        out[6 * j + 1 : 6 * j + 6 : 2] = v.imag
    return out


def vec_to_field(x: np.ndarray, band: int, keys) -> FourierField:
    size = 2 * band + 1
    data = np.zeros((3, size, size, size), dtype=np.complex128)
    for j, k in enumerate(keys):
        v = x[6 * j + 0 : 6 * j + 6 : 2] + 1j * x[6 * j + 1 : 6 * j + 6 : 2]
        data[:, k[0] + band, k[1] + band, k[2] + band] = v
        data[:, -k[0] + band, -k[1] + band, -k[2] + band] = np.conj(v)
    return FourierField(band, data)


def _analytic_apply(kind: str, xi_modes: dict, f_modes: dict) -> dict:
    """Per-mode noise operator: transport i(xi_p.q)f_q, stretching i p (f_q.xi_p)."""
    out: dict = {}
    for p, xv in xi_modes.items():
        pa = np.asarray(p, dtype=np.float64)
        for q, fv in f_modes.items():
            K = (p[0] + q[0], p[1] + q[1], p[2] + q[2])
            if K == (0, 0, 0):
                continue
            term = 1j * complex(xv @ np.asarray(q, dtype=np.float64)) * fv
            if kind == "transport_stretching":
                term = term + 1j * pa * complex(fv @ xv)
            if K in out:
                out[K] = out[K] + term
            else:
                out[K] = term
    return out


def _leray_modes(modes: dict) -> dict:
    out = {}
    for k, v in modes.items():
        ka = np.asarray(k, dtype=np.float64)
        out[k] = v - ka * ((ka @ v) / (ka @ ka))
    return out


def noise_operator_matrix(kind: str, xi: FourierField, keys_in, keys_out) -> np.ndarray:
    """Dense matrix of f -> leray(op(xi, f)) between real mode-pair bases.

    keys_out smaller than the full output band acts as a Galerkin truncation.
    """
    xi_modes = {k: np.asarray(v) for k, v in xi.coeffs.items()}
    pos = {k: j for j, k in enumerate(keys_out)}
    M = np.zeros((6 * len(keys_out), 6 * len(keys_in)))
    for j, q in enumerate(keys_in):
        for c in range(3):
            for part in range(2):
                val = np.zeros(3, dtype=np.complex128)
                val[c] = 1j if part else 1.0
                nq = (-q[0], -q[1], -q[2])
                image = _leray_modes(
                    _analytic_apply(kind, xi_modes, {q: val, nq: np.conj(val)})
                )
                col = np.zeros(6 * len(keys_out))
                for K, v in image.items():
                    if K in pos:
                        i = pos[K]
                        col[6 * i + 0 : 6 * i + 6 : 2] = v.real
                        col[6 * i + 1 : 6 * i + 6 : 2] = v.imag
                M[:, 6 * j + 2 * c + part] = col
    return M


def sobolev_weights(keys, m: int) -> np.ndarray:
    """Per-key multiplier sum_{|alpha| <= m} k^(2 alpha), repeated over coords."""
    out = np.empty(6 * len(keys))
    alphas = [
        (a, b, c)
        for a in range(m + 1)
        for b in range(m + 1)
        for c in range(m + 1)
        if a + b + c <= m
    ]
    for j, k in enumerate(keys):
        w = sum(
            float(k[0]) ** (2 * a) * float(k[1]) ** (2 * b) * float(k[2]) ** (2 * c)
            for a, b, c in alphas
        )
        out[6 * j : 6 * j + 6] = w
    return out


def stokes_weights(keys, m: int) -> np.ndarray:
    out = np.empty(6 * len(keys))
    for j, k in enumerate(keys):
        out[6 * j : 6 * j + 6] = float(k[0] ** 2 + k[1] ** 2 + k[2] ** 2) ** m
    return out


def weighted_pairing(x: np.ndarray, y: np.ndarray, weights: np.ndarray) -> float:
    """<f, g>_m in the real basis: reality doubles the half-space sum."""
    return 2.0 * VOLUME * float(np.sum(weights * x * y))
