"""Stepped shape of the gluing matrix: column permutation, profiles, partitions.

A matrix is *stepped* when its column pivots (row of the first nonzero in each
column) do not decrease from left to right and its row trails (column of the
last nonzero in each row) do not decrease from top to bottom. Sorting the
columns of ``B~^T`` by pivot produces the shape; the kernels in :mod:`trsm` and
:mod:`syrk` then skip the zero areas it exposes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix_core import ConsistencyError, Permutation, SparseCsr


@dataclass(frozen=True, eq=False)
class SteppedProfile:
    """Column pivots (``n_rows`` for an empty column) and row trails (``-1`` for an empty row)."""

    col_pivots: np.ndarray
    row_trails: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.row_trails.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.col_pivots.shape[0])

    def is_stepped(self) -> bool:
        """Pivots non-decreasing; trails of the non-empty rows non-decreasing."""
        trails = self.row_trails[self.row_trails >= 0]
        return bool(np.all(np.diff(self.col_pivots) >= 0) and np.all(np.diff(trails) >= 0))

    def filled(self) -> "SteppedProfile":
        """Profile of ``L^{-1} X`` for an ``X`` with this profile.

        Forward substitution keeps the pivots and can fill a row up to the
        right-most column whose pivot lies at or above it.
        """
        return SteppedProfile(self.col_pivots, np.maximum.accumulate(self.row_trails)
                              if self.n_rows else self.row_trails)

    def __eq__(self, other):
        if not isinstance(other, SteppedProfile):
            return NotImplemented
        return (np.array_equal(self.col_pivots, other.col_pivots)
                and np.array_equal(self.row_trails, other.row_trails))


@dataclass(frozen=True)
class BlockPolicy:
    """Uniform partition by block size (``"size"``) or by block count (``"count"``)."""

    kind: str = "size"
    value: int = 500

    def __post_init__(self):
        if self.kind not in ("size", "count"):
            raise ValueError(f"block policy kind must be 'size' or 'count', got {self.kind!r}")
        if int(self.value) < 1:
            raise ValueError("block size/count must be >= 1")

    @classmethod
    def fixed_size(cls, s: int) -> "BlockPolicy":
        return cls("size", int(s))

    @classmethod
    def fixed_count(cls, c: int) -> "BlockPolicy":
        return cls("count", int(c))

    def __str__(self):
        return f"{self.kind}:{self.value}"


def block_boundaries(n: int, policy: BlockPolicy) -> list[tuple[int, int]]:
    """Contiguous half-open extents covering ``range(n)``.

    >>> block_boundaries(10, BlockPolicy.fixed_size(4))
    [(0, 4), (4, 8), (8, 10)]
    >>> block_boundaries(10, BlockPolicy.fixed_count(2))
    [(0, 5), (5, 10)]
    """
    if n <= 0:
        return []
    if policy.kind == "size":
        s = policy.value
        return [(b, min(b + s, n)) for b in range(0, n, s)]
    count = min(policy.value, n)
    edges = [(i * n) // count for i in range(count + 1)]
    return list(zip(edges[:-1], edges[1:]))


def compute_profile(m) -> SteppedProfile:
    """Exact pivots and trails of a :class:`SparseCsr` or a dense array.

    Stored entries of a sparse matrix count as nonzeros whatever their value;
    dense entries count iff they differ from 0.0.
    """
    if isinstance(m, SparseCsr):
        rows = m.row_indices()
        pivots = np.full(m.n_cols, m.n_rows, dtype=np.int64)
        np.minimum.at(pivots, m.col_idx, rows)
        trails = np.full(m.n_rows, -1, dtype=np.int64)
        nonempty = m.row_counts() > 0
        trails[nonempty] = m.col_idx[m.row_ptr[1:][nonempty] - 1]
        return SteppedProfile(pivots, trails)
    a = np.asarray(m)
    nz = a != 0.0
    n_rows, n_cols = a.shape
    if n_rows == 0 or n_cols == 0:
        return SteppedProfile(np.full(n_cols, n_rows, dtype=np.int64),
                              np.full(n_rows, -1, dtype=np.int64))
    any_col = nz.any(axis=0)
    pivots = np.where(any_col, nz.argmax(axis=0), n_rows).astype(np.int64)
    any_row = nz.any(axis=1)
    trails = np.where(any_row, n_cols - 1 - nz[:, ::-1].argmax(axis=1), -1).astype(np.int64)
    return SteppedProfile(pivots, trails)


def stepped_permutation(bt: SparseCsr) -> Permutation:
    """Stable sort of the columns by pivot; empty columns go last."""
    pivots = compute_profile(bt).col_pivots
    return Permutation.from_forward(np.argsort(pivots, kind="stable"))


def check_profile(x: np.ndarray, profile: SteppedProfile, full: bool = True) -> None:
    """Raise :class:`ConsistencyError` unless ``profile`` bounds the nonzeros of ``x``.

    The profile may be conservative (trails to the right of the true ones), as
    produced by :meth:`SteppedProfile.filled`; pivots must be exact lower bounds.
    """
    n_rows, n_cols = x.shape
    if profile.n_rows != n_rows or profile.n_cols != n_cols:
        raise ConsistencyError(
            f"profile is {profile.n_rows}x{profile.n_cols}, matrix is {n_rows}x{n_cols}")
    if not full or x.size == 0:
        return
    rows = np.arange(n_rows)[:, None]
    cols = np.arange(n_cols)[None, :]
    outside = (rows < profile.col_pivots[None, :]) | (cols > profile.row_trails[:, None])
    if np.any(x[outside] != 0.0):
        raise ConsistencyError("matrix has nonzeros outside its stated profile")


def pivot_uniformity(profile: SteppedProfile) -> float:
    """Largest gap between consecutive sorted pivots relative to the ideal ``n / m``.

    1.0 means perfectly even spacing; large values mean clustered pivots.
    """
    n, m = profile.n_rows, profile.n_cols
    piv = np.sort(profile.col_pivots[profile.col_pivots < n])
    if piv.size == 0 or n == 0:
        return float("nan")
    gaps = np.diff(np.concatenate(([0], piv, [n])))
    return float(gaps.max() / (n / piv.size))
