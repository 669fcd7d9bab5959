"""Two-stage sparse Cholesky ``P K P^T = L L^T`` with L stored by rows.

The symbolic stage (ordering, elimination tree, row patterns of L) depends only
on the sparsity structure of K and can be reused for any K with the same
pattern; the numeric stage fills in values with an up-looking algorithm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .matrix_core import (
    DimensionError,
    NotSPDError,
    Permutation,
    SingularError,
    SparseCsr,
    permute_symmetric,
    transpose as csr_transpose,
)
from .ordering import delay_marked, fill_reducing_order


@dataclass(frozen=True, eq=False)
class SymbolicFactor:
    """Pattern of L for ``P K P^T``.

    Attributes
    ----------
    parent : ndarray
        Elimination tree, ``-1`` at roots.
    row_ptr, col_idx : ndarray
        CSR pattern of L, each row sorted with the diagonal last.
    input_ptr, input_idx : ndarray
        CSR pattern of the K this was computed from, used to reject numeric
        factorizations of a matrix with a different structure.
    """

    n: int
    perm: Permutation
    parent: np.ndarray
    row_ptr: np.ndarray
    col_idx: np.ndarray
    input_ptr: np.ndarray
    input_idx: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.col_idx.shape[0])

    def col_counts(self) -> np.ndarray:
        return np.bincount(self.col_idx, minlength=self.n)


@dataclass(frozen=True, eq=False)
class FactorBundle:
    perm: Permutation
    symbolic: SymbolicFactor
    L: SparseCsr | None = None
    Lt: SparseCsr | None = None  # L^T by rows, i.e. L by columns

    @property
    def n(self) -> int:
        return self.symbolic.n

    @property
    def is_numeric(self) -> bool:
        return self.L is not None


def _lower_part(a: SparseCsr) -> SparseCsr:
    rows = a.row_indices()
    keep = a.col_idx <= rows
    row_ptr = np.zeros(a.n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows[keep], minlength=a.n_rows), out=row_ptr[1:])
    return SparseCsr(a.n_rows, a.n_cols, row_ptr, a.col_idx[keep], a.values[keep])


def symbolic_factor(k: SparseCsr, perm: Permutation) -> SymbolicFactor:
    if k.n_rows != k.n_cols:
        raise DimensionError(f"Cholesky needs a square matrix, got {k.n_rows}x{k.n_cols}")
    if perm.size != k.n_rows:
        raise DimensionError("ordering length does not match the matrix order")
    n = k.n_rows
    a = _lower_part(permute_symmetric(k, perm))
    parent = _kernels.etree(n, a.row_ptr, a.col_idx)
    l_ptr, l_idx = _kernels.symbolic_rows(n, a.row_ptr, a.col_idx, parent)
    return SymbolicFactor(n, perm, parent, l_ptr, l_idx, k.row_ptr.copy(), k.col_idx.copy())


def numeric_factor(k: SparseCsr, bundle: FactorBundle | SymbolicFactor) -> FactorBundle:
    """Fill L with values for ``k``; the symbolic data in ``bundle`` is reused as-is.

    Raises
    ------
    NotSPDError
        On a non-positive pivot; ``column`` is in the permuted ordering.
    """
    sym = bundle.symbolic if isinstance(bundle, FactorBundle) else bundle
    if (k.shape != (sym.n, sym.n) or not np.array_equal(k.row_ptr, sym.input_ptr)
            or not np.array_equal(k.col_idx, sym.input_idx)):
        raise DimensionError("matrix pattern differs from the one the symbolic factor was built for")
    a = _lower_part(permute_symmetric(k, sym.perm))
    values, failed, pivot = _kernels.cholesky_up(
        sym.n, a.row_ptr, a.col_idx, a.values, sym.row_ptr, sym.col_idx)
    if failed >= 0:
        raise NotSPDError(int(failed), float(pivot))
    L = SparseCsr(sym.n, sym.n, sym.row_ptr, sym.col_idx, values)
    return FactorBundle(sym.perm, sym, L, csr_transpose(L))


def factorize(k: SparseCsr, ordering: str = "amd", late=None) -> FactorBundle:
    """Ordering, symbolic and numeric stages in one call.

    ``late`` optionally marks rows of ``k`` to be eliminated as late as the
    elimination tree allows (see :func:`.ordering.delay_marked`); the fill is
    unchanged.
    """
    perm = fill_reducing_order(k, ordering)
    sym = symbolic_factor(k, perm)
    if late is not None:
        late = np.asarray(late, dtype=bool)
        if late.shape != (k.n_rows,):
            raise DimensionError("late-marker length differs from the matrix order")
        post = delay_marked(sym.parent, late[perm.forward])
        sym = symbolic_factor(k, Permutation.from_forward(perm.forward[post]))
    return numeric_factor(k, sym)


def trsv_lower(L: SparseCsr, b: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Solve ``L x = b`` (or ``L^T x = b``) for a lower-triangular CSR ``L``."""
    x = np.array(b, dtype=np.float64, copy=True)
    if x.ndim != 1 or x.shape[0] != L.n_rows or L.n_rows != L.n_cols:
        raise DimensionError(f"cannot solve {L.shape} system with vector of shape {x.shape}")
    if transpose:
        bad = _kernels.csr_lower_transposed_solve_vec(L.row_ptr, L.col_idx, L.values, x)
    else:
        bad = _kernels.csr_lower_solve_vec(L.row_ptr, L.col_idx, L.values, x)
    if bad >= 0:
        raise SingularError(int(bad))
    return x


def solve(bundle: FactorBundle, b: np.ndarray) -> np.ndarray:
    """``K^{-1} b`` through the factor, undoing the fill-reducing permutation."""
    p = bundle.perm.forward
    y = trsv_lower(bundle.L, np.asarray(b, dtype=np.float64)[p])
    z = trsv_lower(bundle.L, y, transpose=True)
    x = np.empty_like(z)
    x[p] = z
    return x
