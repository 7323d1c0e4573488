"""Truncated Fourier representation of real, mean-zero vector fields on the 3-torus.

A field with band N keeps complex coefficients f_k in C^3 for integer wave
vectors |k|_inf <= N and represents

    f(x) = sum_k f_k exp(i k.x),   x in [0, 2*pi)^3,

subject to the reality constraint f_{-k} = conj(f_k) and f_0 = 0.  The public
contract is the sparse map k -> f_k exposed by ``FourierField.coeffs``; the
dense cube held internally is an optimization detail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .errors import AliasingError, InvalidFieldError

TWO_PI = 2.0 * math.pi
VOLUME = TWO_PI**3  # measure of [0, 2*pi)^3

WaveVector = tuple[int, int, int]
MultiIndex = tuple[int, int, int]


# ---------------------------------------------------------------------------
# multi-index helpers


def multi_index_order(alpha: MultiIndex) -> int:
    return alpha[0] + alpha[1] + alpha[2]


def multi_indices(max_order: int) -> list[MultiIndex]:
    """All multi-indices with |alpha| <= max_order, graded-lexicographic order."""
    out = []
    for total in range(max_order + 1):
        for a1 in range(total, -1, -1):
            for a2 in range(total - a1, -1, -1):
                out.append((a1, a2, total - a1 - a2))
    return out


def multi_index_leq(a: MultiIndex, b: MultiIndex) -> bool:
    return a[0] <= b[0] and a[1] <= b[1] and a[2] <= b[2]


def multi_index_sub(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def multi_index_binom(a: MultiIndex, b: MultiIndex) -> int:
    return math.comb(a[0], b[0]) * math.comb(a[1], b[1]) * math.comb(a[2], b[2])


# ---------------------------------------------------------------------------
# cached integer-wavenumber grids


@lru_cache(maxsize=128)
def _grids(band: int):
    r = np.arange(-band, band + 1)
    k1, k2, k3 = np.meshgrid(r, r, r, indexing="ij")
    ksq = (k1 * k1 + k2 * k2 + k3 * k3).astype(np.float64)
    # lexicographically positive half-space: first nonzero component > 0
    lexpos = (k1 > 0) | ((k1 == 0) & (k2 > 0)) | ((k1 == 0) & (k2 == 0) & (k3 > 0))
    arrs = (k1.astype(np.float64), k2.astype(np.float64), k3.astype(np.float64), ksq, lexpos)
    for a in arrs:
        a.setflags(write=False)
    return arrs


def wavenumber_grids(band: int):
    """Read-only (k1, k2, k3, |k|^2) float arrays over the (2*band+1)^3 cube."""
    k1, k2, k3, ksq, _ = _grids(band)
    return k1, k2, k3, ksq


class FourierField:
    """Immutable band-limited vector field; coefficients live on a dense cube.

    ``data`` has shape (3, 2*band+1, 2*band+1, 2*band+1) with component c of
    f_k at ``data[c, k1+band, k2+band, k3+band]``.
    """

    __slots__ = ("band", "_data")

    def __init__(self, band: int, data: np.ndarray):
        if band < 0:
            raise InvalidFieldError("band must be nonnegative")
        size = 2 * band + 1
        data = np.ascontiguousarray(data, dtype=np.complex128)
        if data.shape != (3, size, size, size):
            raise InvalidFieldError(
                f"coefficient cube has shape {data.shape}, expected {(3, size, size, size)}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "band", band)
        object.__setattr__(self, "_data", data)

    def __setattr__(self, name, value):
        raise AttributeError("FourierField is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, band: int) -> "FourierField":
        size = 2 * band + 1
        return cls(band, np.zeros((3, size, size, size), dtype=np.complex128))

    @classmethod
    def from_modes(cls, band: int, modes: Mapping[WaveVector, Iterable[complex]]) -> "FourierField":
        """Build from a full sparse map; validates reality and mean-zero."""
        size = 2 * band + 1
        data = np.zeros((3, size, size, size), dtype=np.complex128)
        for k, value in modes.items():
            k = tuple(int(c) for c in k)
            if max(abs(c) for c in k) > band:
                raise InvalidFieldError(f"mode {k} exceeds band {band}")
            data[:, k[0] + band, k[1] + band, k[2] + band] = np.asarray(
                list(value), dtype=np.complex128
            )
        field = cls(band, data)
        field.validate()
        return field

    @property
    def data(self) -> np.ndarray:
        """Read-only dense coefficient cube (internal layout)."""
        return self._data

    @property
    def coeffs(self) -> dict[WaveVector, np.ndarray]:
        """Sparse map of nonzero coefficients; keys are integer wave vectors."""
        n = self.band
        nz = np.argwhere(np.any(self._data != 0, axis=0))
        out: dict[WaveVector, np.ndarray] = {}
        for i1, i2, i3 in nz:
            out[(int(i1) - n, int(i2) - n, int(i3) - n)] = self._data[:, i1, i2, i3].copy()
        return out

    def coeff(self, k: WaveVector) -> np.ndarray:
        """Coefficient at wave vector k (zero vector when outside the band)."""
        n = self.band
        if max(abs(int(c)) for c in k) > n:
            return np.zeros(3, dtype=np.complex128)
        return self._data[:, k[0] + n, k[1] + n, k[2] + n].copy()

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        """Check reality (exact conjugate pairs) and the zero mean mode."""
        d = self._data
        if not np.array_equal(d, np.conj(d[:, ::-1, ::-1, ::-1])):
            raise InvalidFieldError("reality constraint f_{-k} = conj(f_k) violated")
        n = self.band
        if np.any(d[:, n, n, n] != 0):
            raise InvalidFieldError("mean mode k=0 must vanish")

    def max_abs(self) -> float:
        return float(np.abs(self._data).max()) if self._data.size else 0.0

    def solenoidal_residual(self) -> tuple[float, float]:
        """(max |k.f_k|, max |k||f_k|) — the relative divergence scale."""
        k1, k2, k3, ksq = wavenumber_grids(self.band)
        d = self._data
        dot = k1 * d[0] + k2 * d[1] + k3 * d[2]
        num = float(np.abs(dot).max())
        den = float((np.sqrt(ksq) * np.sqrt((np.abs(d) ** 2).sum(axis=0))).max())
        return num, den

    def is_solenoidal(self, tol: float = 1e-12) -> bool:
        num, den = self.solenoidal_residual()
        return num <= tol * max(den, 1e-300)

    # -- linear structure ----------------------------------------------------

    def _embedded(self, band: int) -> np.ndarray:
        if band == self.band:
            return self._data
        if band < self.band:
            raise ValueError("cannot embed into a smaller band")
        size = 2 * band + 1
        out = np.zeros((3, size, size, size), dtype=np.complex128)
        lo, hi = band - self.band, band + self.band + 1
        out[:, lo:hi, lo:hi, lo:hi] = self._data
        return out

    def __add__(self, other: "FourierField") -> "FourierField":
        band = max(self.band, other.band)
        return FourierField(band, self._embedded(band) + other._embedded(band))

    def __sub__(self, other: "FourierField") -> "FourierField":
        band = max(self.band, other.band)
        return FourierField(band, self._embedded(band) - other._embedded(band))

    def __mul__(self, scalar) -> "FourierField":
        return FourierField(self.band, self._data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "FourierField":
        return FourierField(self.band, -self._data)

    def __repr__(self) -> str:
        nnz = int(np.count_nonzero(np.any(self._data != 0, axis=0)))
        return f"FourierField(band={self.band}, modes={nnz})"


def mode_pair_field(band: int, k: WaveVector, value) -> FourierField:
    """Real field carried by a single +-k pair: f_k = value, f_{-k} = conj(value)."""
    k = tuple(int(c) for c in k)
    if k == (0, 0, 0):
        raise InvalidFieldError("mode pair requires k != 0")
    value = np.asarray(value, dtype=np.complex128)
    neg = tuple(-c for c in k)
    return FourierField.from_modes(band, {k: value, neg: np.conj(value)})


# ---------------------------------------------------------------------------
# core operations


def derivative(f: FourierField, alpha: MultiIndex) -> FourierField:
    """Partial derivative D^alpha: per-mode multiplication by (i k)^alpha."""
    a1, a2, a3 = (int(a) for a in alpha)
    if min(a1, a2, a3) < 0:
        raise ValueError("multi-index entries must be nonnegative")
    if a1 == a2 == a3 == 0:
        return f
    k1, k2, k3, _ = wavenumber_grids(f.band)
    mult = k1**a1 * k2**a2 * k3**a3  # exact integers in float64 at these scales
    phase = 1j ** ((a1 + a2 + a3) % 4)  # exact unit
    return FourierField(f.band, f.data * (mult * phase))


def _conv_scalar(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full linear convolution of two coefficient cubes (direct shift-add).

    Loops over the smaller operand's support; every term of the direct
    convolution sum is accumulated, no truncation.
    """
    if a.size > b.size:
        a, b = b, a
    sa, sb = a.shape[0], b.shape[0]
    so = sa + sb - 1
    out = np.zeros((so, so, so), dtype=np.complex128)
    for i1, i2, i3 in np.argwhere(a != 0):
        out[i1 : i1 + sb, i2 : i2 + sb, i3 : i3 + sb] += a[i1, i2, i3] * b
    return out


def _symmetrized(data: np.ndarray) -> np.ndarray:
    # restore exact conjugate symmetry (summation order inside the convolution
    # differs between +-k, leaving ~1 ulp asymmetry that downstream exact
    # cancellation logic cannot tolerate)
    return 0.5 * (data + np.conj(data[:, ::-1, ::-1, ::-1]))


def multiply(f: FourierField, g: FourierField) -> FourierField:
    """Componentwise convolution product; output band = band(f) + band(g).

    Every convolution term is kept — truncation is the caller's business.
    """
    so = 2 * (f.band + g.band) + 1
    out = np.empty((3, so, so, so), dtype=np.complex128)
    for c in range(3):
        out[c] = _conv_scalar(f.data[c], g.data[c])
    return FourierField(f.band + g.band, _symmetrized(out))


def _paired_real_sum(values: np.ndarray) -> tuple[float, float]:
    """Sum a conjugate-symmetric cube, cancelling +-k imaginary parts exactly."""
    re = float(np.sum(values.real))
    im_pairs = values.imag + values.imag[::-1, ::-1, ::-1]
    im = 0.5 * float(np.sum(im_pairs))
    return re, im


def _overlap(f: FourierField, g: FourierField) -> tuple[np.ndarray, np.ndarray, int]:
    band = min(f.band, g.band)
    df, dg = f.data, g.data
    if f.band > band:
        lo, hi = f.band - band, f.band + band + 1
        df = df[:, lo:hi, lo:hi, lo:hi]
    if g.band > band:
        lo, hi = g.band - band, g.band + band + 1
        dg = dg[:, lo:hi, lo:hi, lo:hi]
    return df, dg, band


def inner_l2(f: FourierField, g: FourierField) -> float:
    """L2 inner product (2*pi)^3 sum_k f_k . conj(g_k) for real fields."""
    df, dg, _ = _overlap(f, g)
    prod = np.einsum("cxyz,cxyz->xyz", df, np.conj(dg))
    re, im = _paired_real_sum(prod)
    if abs(im) > 1e-12 * abs(re) + 1e-300:
        raise InvalidFieldError("imaginary residue in inner product: reality violated")
    return VOLUME * re


def weighted_inner(f: FourierField, g: FourierField, weight: np.ndarray) -> float:
    """(2*pi)^3 sum_k w_k f_k . conj(g_k) for an even real weight cube."""
    df, dg, _ = _overlap(f, g)
    prod = np.einsum("cxyz,cxyz->xyz", df, np.conj(dg)) * weight
    re, im = _paired_real_sum(prod)
    if abs(im) > 1e-12 * abs(re) + 1e-300:
        raise InvalidFieldError("imaginary residue in inner product: reality violated")
    return VOLUME * re


def eval_grid(f: FourierField, resolution: int) -> np.ndarray:
    """Sample f on the uniform grid x_j = 2*pi*j/resolution; shape (R, R, R, 3).

    Exact trigonometric evaluation: requires resolution >= 2*band+1 so no two
    retained modes alias to the same grid frequency.
    """
    n, R = f.band, int(resolution)
    if R < 2 * n + 1:
        raise AliasingError(f"resolution {R} < 2*band+1 = {2 * n + 1}")
    spect = np.zeros((3, R, R, R), dtype=np.complex128)
    idx = np.arange(-n, n + 1) % R
    spect[:, idx[:, None, None], idx[None, :, None], idx[None, None, :]] = f.data
    vals = np.fft.ifftn(spect, axes=(1, 2, 3)) * R**3
    scale = max(1.0, f.max_abs())
    if float(np.abs(vals.imag).max()) > 1e-12 * scale:
        raise InvalidFieldError("grid values not real: reality constraint violated")
    return np.moveaxis(vals.real, 0, -1)


# ---------------------------------------------------------------------------
# random fields


@dataclass(frozen=True)
class FieldSpec:
    """Distribution parameters for a random band-limited field."""

    band: int
    decay: float = 1.0
    divergence_free: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.band < 1:
            raise ValueError("band must be >= 1")
        if not (self.decay >= 0.0):
            raise ValueError("decay must be >= 0")


def random_field(spec: FieldSpec, rng: np.random.Generator | None = None) -> FourierField:
    """Draw a random real field: |f_k| ~ (1+|k|^2)^(-decay/2) complex Gaussians.

    Coefficients are drawn on the lexicographically positive half-space and
    mirrored by conjugation, so reality holds by construction.  With the
    divergence-free flag each drawn coefficient is projected onto k-perp.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    n = spec.band
    size = 2 * n + 1
    k1, k2, k3, ksq, lexpos = _grids(n)
    draw = rng.standard_normal((3, size, size, size)) + 1j * rng.standard_normal(
        (3, size, size, size)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = np.where(ksq > 0, (1.0 + ksq) ** (-spec.decay / 2.0), 0.0)
    data = draw * (amp * lexpos)
    if spec.divergence_free:
        dot = k1 * data[0] + k2 * data[1] + k3 * data[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(ksq > 0, dot / np.where(ksq > 0, ksq, 1.0), 0.0)
        data = data - np.stack([k1 * coef, k2 * coef, k3 * coef])
    data = data + np.conj(data[:, ::-1, ::-1, ::-1])
    return FourierField(n, data)


# ---------------------------------------------------------------------------
# JSON snapshot format


def _lex_positive(k: WaveVector) -> bool:
    return k > (0, 0, 0) if k[0] != 0 else ((k[1], k[2]) > (0, 0) if k[1] != 0 else k[2] > 0)


def field_to_json_dict(f: FourierField) -> dict:
    """Snapshot {"band": N, "coeffs": [...]} storing the k > 0 half-space only."""
    entries = []
    for k in sorted(key for key in f.coeffs if _lex_positive(key)):
        v = f.coeff(k)
        entries.append(
            {
                "k": [int(c) for c in k],
                "re": [float(x) for x in v.real],
                "im": [float(x) for x in v.imag],
            }
        )
    return {"band": int(f.band), "coeffs": entries}


def field_from_json_dict(doc: Mapping) -> FourierField:
    band = int(doc["band"])
    modes: dict[WaveVector, np.ndarray] = {}
    for entry in doc["coeffs"]:
        k = tuple(int(c) for c in entry["k"])
        if not _lex_positive(k):
            raise InvalidFieldError(f"snapshot stores non-half-space mode {k}")
        v = np.asarray(entry["re"], dtype=np.float64) + 1j * np.asarray(
            entry["im"], dtype=np.float64
        )
        modes[k] = v
        modes[tuple(-c for c in k)] = np.conj(v)
    return FourierField.from_modes(band, modes)
