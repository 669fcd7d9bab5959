"""Triangular solves ``X <- L^{-1} X`` with a matrix of right-hand sides.

All variants work in place on a C-ordered float64 ``X`` and return a
:class:`FlopCounter`. The split variants rely on one fact: forward substitution
only propagates values downwards, so the zeros of ``X`` above its column pivots
stay zero and every step touching only them can be skipped.

* ``rhs_split`` cuts ``X`` into column blocks and solves each one with the
  trailing subfactor that starts at the block's highest pivot.
* ``factor_split`` walks the diagonal blocks of ``L``: a small TRSM on the
  current block rows, then a GEMM pushing the update into the rows below, both
  restricted to the columns that can be nonzero so far. With pruning the GEMM
  only runs over the rows of the subdiagonal factor block that hold entries.

Dense inner kernels call LAPACK/BLAS through scipy and numpy; sparse inner
kernels are the compiled loops in :mod:`._kernels`. FLOPs are counted from the
operand shapes and nonzero counts, never measured.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dtrsm

from . import _kernels
from .matrix_core import (
    DimensionError,
    FlopCounter,
    SingularError,
    SparseCsr,
    csr_to_dense,
    extract_sub_csr,
    gather_nonempty_rows,
    transpose,
)
from .stepped import BlockPolicy, SteppedProfile, block_boundaries, check_profile

TRSM_VARIANTS = ("baseline_dense", "baseline_sparse", "rhs_split", "factor_split")
STORAGES = ("sparse", "dense")


@dataclass(frozen=True)
class TrsmConfig:
    variant: str = "factor_split"
    partition: BlockPolicy = field(default_factory=BlockPolicy)
    factor_block_storage: str = "sparse"
    pruning: bool = True

    def __post_init__(self):
        if self.variant not in TRSM_VARIANTS:
            raise ValueError(f"unknown TRSM variant {self.variant!r}")
        if self.factor_block_storage not in STORAGES:
            raise ValueError(f"factor storage must be one of {STORAGES}")

    @classmethod
    def for_dim(cls, dim: int, partition: BlockPolicy | None = None) -> "TrsmConfig":
        """Factor splitting with pruning; sparse factor blocks in 2D, dense in 3D."""
        return cls("factor_split", partition or BlockPolicy(),
                   "sparse" if dim == 2 else "dense", True)

    @property
    def label(self) -> str:
        if self.variant in ("rhs_split", "factor_split"):
            return f"{self.variant}:{self.factor_block_storage}"
        return self.variant


def _check_operands(L: SparseCsr, X: np.ndarray) -> None:
    if L.n_rows != L.n_cols:
        raise DimensionError(f"factor must be square, got {L.shape}")
    if X.ndim != 2 or X.shape[0] != L.n_rows:
        raise DimensionError(f"right-hand side of shape {X.shape} for factor of order {L.n_rows}")
    if X.dtype != np.float64:
        raise TypeError("right-hand side must be float64 (it is solved in place)")


def _offdiag_nnz(L: SparseCsr) -> int:
    return L.nnz - int(np.count_nonzero(L.row_indices() == L.col_idx))


def _sparse_solve(L: SparseCsr, X: np.ndarray, row_offset: int = 0) -> None:
    bad = _kernels.csr_lower_solve(L.row_ptr, L.col_idx, L.values, X)
    if bad >= 0:
        raise SingularError(row_offset + int(bad))


def _dense_solve(Ld: np.ndarray, X: np.ndarray, row_offset: int = 0) -> None:
    zero = np.flatnonzero(np.diagonal(Ld) == 0.0)
    if zero.size:
        raise SingularError(row_offset + int(zero[0]))
    # L T = B  <=>  T^T L^T = B^T; both transposes are Fortran-ordered views of
    # C-ordered arrays, so BLAS gets them without another copy
    rhs = np.ascontiguousarray(X)
    sol = dtrsm(1.0, Ld.T, rhs.T, side=1, lower=0, trans_a=0, overwrite_b=1)
    X[...] = sol.T


def _dense_count(rows: int, width: int) -> tuple[int, int]:
    return rows * (rows - 1) // 2 * width, rows * width


def trsm_baseline(L: SparseCsr, X: np.ndarray, storage: str = "sparse") -> FlopCounter:
    """Plain forward substitution over all rows and columns."""
    _check_operands(L, X)
    n, m = X.shape
    flops = FlopCounter()
    if n == 0 or m == 0:
        return flops
    if storage == "dense":
        _dense_solve(csr_to_dense(L), X)
        flops.add(*_dense_count(n, m))
    elif storage == "sparse":
        _sparse_solve(L, X)
        flops.add(_offdiag_nnz(L) * m, n * m)
    else:
        raise ValueError(f"factor storage must be one of {STORAGES}")
    return flops


def trsm_rhs_split(L: SparseCsr, X: np.ndarray, profile: SteppedProfile,
                   partition: BlockPolicy, storage: str = "sparse",
                   check: bool = True) -> FlopCounter:
    """Solve each column block with the subfactor below its highest pivot."""
    _check_operands(L, X)
    check_profile(X, profile, full=check)
    n, m = X.shape
    flops = FlopCounter()
    Ld = csr_to_dense(L) if storage == "dense" else None
    for c0, c1 in block_boundaries(m, partition):
        r = int(profile.col_pivots[c0:c1].min())
        if r >= n:
            continue
        width = c1 - c0
        block = X[r:, c0:c1]
        if Ld is not None:
            _dense_solve(Ld[r:, r:], block, r)
            flops.add(*_dense_count(n - r, width))
        else:
            sub = extract_sub_csr(L, r, n, r, n)
            _sparse_solve(sub, block, r)
            flops.add(_offdiag_nnz(sub) * width, (n - r) * width)
    return flops


def trsm_width_schedule(profile: SteppedProfile, partition: BlockPolicy) -> np.ndarray:
    """Number of leading columns each factor block has to touch.

    For the block of rows ``[r0, r1)`` this is one past the right-most trail in
    rows ``[0, r1)``: every column with its pivot above ``r1`` lies within it.
    On a stepped profile that is just the trail of row ``r1 - 1``.
    """
    n = profile.n_rows
    blocks = block_boundaries(n, partition)
    if not blocks:
        return np.zeros(0, dtype=np.int64)
    reach = np.maximum.accumulate(profile.row_trails) + 1
    return np.array([reach[r1 - 1] for _, r1 in blocks], dtype=np.int64)


def _dense_window(a: SparseCsr, a_rows: np.ndarray, row0: int, row1: int,
                  col0: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row, column (relative to the window) and value of entries with col >= col0."""
    lo, hi = a.row_ptr[row0], a.row_ptr[row1]
    cols = a.col_idx[lo:hi]
    keep = cols >= col0
    return a_rows[lo:hi][keep] - row0, cols[keep] - col0, a.values[lo:hi][keep]


def trsm_factor_split(L: SparseCsr, X: np.ndarray, profile: SteppedProfile,
                      partition: BlockPolicy, block_storage: str = "sparse",
                      pruning: bool = True, check: bool = True,
                      Lt: SparseCsr | None = None) -> FlopCounter:
    """Blocked forward substitution over diagonal blocks of ``L``.

    ``Lt`` (``L`` transposed) gives cheap access to the subdiagonal block
    columns; it is built here when the caller does not have it. Dense factor
    blocks are scattered straight from the CSR arrays.
    """
    _check_operands(L, X)
    check_profile(X, profile, full=check)
    if block_storage not in STORAGES:
        raise ValueError(f"factor storage must be one of {STORAGES}")
    dense = block_storage == "dense"
    n = X.shape[0]
    flops = FlopCounter()
    blocks = block_boundaries(n, partition)
    widths = trsm_width_schedule(profile, partition)
    if Lt is None and len(blocks) > 1:
        Lt = transpose(L)
    if dense:
        l_rows = L.row_indices()
        lt_rows = Lt.row_indices() if Lt is not None else None
    for (r0, r1), w in zip(blocks, widths.tolist()):
        if w == 0:
            continue
        s = r1 - r0
        top = X[r0:r1, :w]
        if dense:
            i, j, v = _dense_window(L, l_rows, r0, r1, r0)
            diag = np.zeros((s, s))
            diag[i, j] = v
            _dense_solve(diag, top, r0)
            flops.add(*_dense_count(s, w))
        else:
            diag = extract_sub_csr(L, r0, r1, r0, r1)
            _sparse_solve(diag, top, r0)
            flops.add(_offdiag_nnz(diag) * w, s * w)
        if r1 == n:
            continue
        below = X[r1:, :w]
        if dense:
            # entries of L[r1:, r0:r1], read column-wise from Lt
            j, i, v = _dense_window(Lt, lt_rows, r0, r1, r1)
            if pruning:
                hit = np.zeros(n - r1, dtype=bool)
                hit[i] = True
                row_map = np.flatnonzero(hit)
                if row_map.size == 0:
                    continue
                i = (np.cumsum(hit) - 1)[i]
                sub = np.zeros((row_map.size, s))
                sub[i, j] = v
                below[row_map] -= sub @ top
            else:
                sub = np.zeros((n - r1, s))
                sub[i, j] = v
                below -= sub @ top
            flops.add(sub.shape[0] * s * w)
            continue
        sub = transpose(extract_sub_csr(Lt, r0, r1, r1, n))
        if pruning:
            sub, row_map = gather_nonempty_rows(sub)
            if sub.n_rows == 0:
                continue
        else:
            row_map = np.arange(sub.n_rows, dtype=np.int64)
        _kernels.csr_sub_matmul(sub.row_ptr, sub.col_idx, sub.values, top, below, row_map)
        flops.add(sub.nnz * w)
    return flops


def trsm(L: SparseCsr, X: np.ndarray, profile: SteppedProfile | None,
         cfg: TrsmConfig, check: bool = True, Lt: SparseCsr | None = None) -> FlopCounter:
    """Dispatch on ``cfg.variant``; baselines ignore ``profile``."""
    if cfg.variant == "baseline_dense":
        return trsm_baseline(L, X, "dense")
    if cfg.variant == "baseline_sparse":
        return trsm_baseline(L, X, "sparse")
    if profile is None:
        raise ValueError(f"{cfg.variant} needs the stepped profile of the right-hand side")
    if cfg.variant == "rhs_split":
        return trsm_rhs_split(L, X, profile, cfg.partition, cfg.factor_block_storage, check)
    return trsm_factor_split(L, X, profile, cfg.partition, cfg.factor_block_storage,
                             cfg.pruning, check, Lt)
