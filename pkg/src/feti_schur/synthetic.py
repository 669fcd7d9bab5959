"""Synthetic factors and stepped right-hand sides for kernel checks."""

from __future__ import annotations

import numpy as np

from .matrix_core import SparseCsr


def triangular_pivots(n: int, m: int) -> np.ndarray:
    """Pivot of column ``i`` at row ``floor(i * n / m)``: the perfectly triangular shape."""
    return (np.arange(m, dtype=np.int64) * n) // m


def stepped_dense(rng: np.random.Generator, n: int, m: int, pivots=None,
                  density: float = 1.0) -> np.ndarray:
    """Random ``n x m`` matrix with the given (sorted) column pivots.

    Every pivot entry is nonzero; entries below pivots are nonzero with
    probability ``density``; everything above the pivots is exactly 0.0.
    """
    if pivots is None:
        pivots = np.sort(rng.integers(0, n, size=m))
    pivots = np.asarray(pivots, dtype=np.int64)
    x = rng.uniform(-1.0, 1.0, size=(n, m))
    if density < 1.0:
        x *= rng.random((n, m)) < density
    rows = np.arange(n)[:, None]
    x[rows < pivots[None, :]] = 0.0
    live = pivots < n
    x[pivots[live], np.flatnonzero(live)] = rng.uniform(0.5, 1.5, size=int(live.sum()))
    return x


def random_lower_factor(rng: np.random.Generator, n: int, density: float = 0.1) -> SparseCsr:
    """Sparse lower-triangular factor with a dominant positive diagonal."""
    dense = np.tril(rng.uniform(-1.0, 1.0, size=(n, n)), -1)
    dense *= rng.random((n, n)) < density
    np.fill_diagonal(dense, 1.0 + np.abs(dense).sum(axis=1))
    return SparseCsr.from_dense(dense)


def dense_lower_factor(rng: np.random.Generator, n: int) -> SparseCsr:
    """Fully populated lower triangle (for dense FLOP counting)."""
    dense = np.tril(rng.uniform(0.0, 1.0, size=(n, n)), -1) / n
    np.fill_diagonal(dense, 1.0 + rng.uniform(0.0, 1.0, size=n))
    return SparseCsr.from_dense(dense)


def random_spd(rng: np.random.Generator, n: int, density: float = 0.2) -> SparseCsr:
    """Random sparse SPD matrix (symmetric pattern, diagonally dominant)."""
    a = rng.uniform(-1.0, 1.0, size=(n, n)) * (rng.random((n, n)) < density)
    a = np.tril(a, -1)
    a = a + a.T
    np.fill_diagonal(a, 1.0 + np.abs(a).sum(axis=1))
    return SparseCsr.from_dense(a)
