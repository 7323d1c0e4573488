"""Sobolev, Stokes and sup-norm functionals for band-limited fields."""

from __future__ import annotations

import math

import numpy as np
import scipy.fft

from .fields import (
    FourierField,
    derivative,
    eval_grid,
    inner_l2,
    multi_indices,
    wavenumber_grids,
    weighted_inner,
)
from .operators import require_solenoidal

__all__ = [
    "sobolev_inner",
    "sobolev_norm",
    "stokes_inner",
    "winf_norm",
    "wkinf_norm",
]


def sobolev_inner(f: FourierField, g: FourierField, m: int) -> float:
    """Unweighted W^{m,2} pairing: sum over |alpha| <= m of <D^a f, D^a g>."""
    m = int(m)
    if m < 0:
        raise ValueError("Sobolev order must be nonnegative")
    total = 0.0
    for alpha in multi_indices(m):
        total += inner_l2(derivative(f, alpha), derivative(g, alpha))
    return total


def sobolev_norm(f: FourierField, m: int) -> float:
    return math.sqrt(max(sobolev_inner(f, f, m), 0.0))


def stokes_inner(f: FourierField, g: FourierField, m: int) -> float:
    """Stokes-power pairing (2*pi)^3 sum_k |k|^(2m) f_k . conj(g_k).

    Both fields must be divergence-free so the |k|^2 multiplier coincides with
    the projected Stokes operator on the retained modes.
    """
    m = int(m)
    if m < 0:
        raise ValueError("Stokes order must be nonnegative")
    require_solenoidal(f, "stokes_inner")
    require_solenoidal(g, "stokes_inner")
    band = min(f.band, g.band)
    ksq = wavenumber_grids(band)[3]
    weight = ksq**m if m > 0 else np.ones_like(ksq)
    return weighted_inner(f, g, weight)


def _sup_grid_resolution(band: int) -> int:
    # oversample beyond the Nyquist minimum so grid maxima track true sup-norms
    return scipy.fft.next_fast_len(max(4 * band + 1, 9))


def _grid_max_euclid(f: FourierField, resolution: int) -> float:
    vals = eval_grid(f, resolution)
    return float(np.sqrt((vals**2).sum(axis=-1)).max())


def winf_norm(f: FourierField, k: int) -> float:
    """W^{k,inf} monitor norm for k in {0,1}.

    k=0: max over the oversampled grid of the Euclidean length of f.
    k=1: that plus max_j of the grid sup of |d_j f|.
    """
    if k not in (0, 1):
        raise ValueError("winf_norm supports orders 0 and 1 only")
    res = _sup_grid_resolution(f.band)
    out = _grid_max_euclid(f, res)
    if k == 1:
        axes = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
        out += max(_grid_max_euclid(derivative(f, a), res) for a in axes)
    return out


def wkinf_norm(f: FourierField, order: int) -> float:
    """General-order sup-norm: max over |alpha| <= order of grid sup of D^a f."""
    order = int(order)
    if order < 0:
        raise ValueError("order must be nonnegative")
    res = _sup_grid_resolution(f.band)
    return max(_grid_max_euclid(derivative(f, alpha), res) for alpha in multi_indices(order))
