"""RNG substreams, bounded worker pool, deterministic float formatting."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

THREADS_ENV = "TORUS_SPDE_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key): reproducible trial substreams."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def effective_threads(requested: int | None = None) -> int:
    """Worker count: explicit request capped by TORUS_SPDE_THREADS (default 1)."""
    cap = os.environ.get(THREADS_ENV)
    cap_n = max(1, int(cap)) if cap else None
    if requested is None:
        return cap_n if cap_n is not None else 1
    requested = max(1, int(requested))
    return min(requested, cap_n) if cap_n is not None else requested


def pmap(fn: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> list[R]:
    """Map preserving input order; results are reduced by the caller in index
    order so scheduling can never change outputs."""
    n = effective_threads(threads)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def fmt17(x: float) -> str:
    """17-significant-digit decimal, enough to round-trip any double."""
    return format(float(x), ".17g")
