"""Matrix types, permutations, submatrix extraction and FLOP accounting.

Dense matrices are plain C-ordered ``float64`` numpy arrays. A row-major array
with a leading dimension is exactly what numpy gives us, and submatrix views
(``x[r0:r1, c0:c1]``) share storage with their parent, so no wrapper type is
needed for them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Shapes, windows or index maps do not fit together."""


class SingularError(ArithmeticError):
    """A triangular factor has a zero on its diagonal."""

    def __init__(self, row: int):
        super().__init__(f"zero diagonal entry in triangular factor at row {row}")
        self.row = row


class NotSPDError(ArithmeticError):
    """Cholesky hit a non-positive pivot."""

    def __init__(self, column: int, pivot: float):
        super().__init__(f"matrix is not SPD: pivot {pivot!r} in column {column}")
        self.column = column
        self.pivot = pivot


class ConsistencyError(ValueError):
    """A sparsity profile does not describe the matrix it was given with."""


@dataclass(frozen=True, eq=False)
class SparseCsr:
    """Compressed sparse row matrix with strictly increasing column indices per row."""

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "values", values)
        if self.n_rows < 0 or self.n_cols < 0:
            raise DimensionError("negative matrix dimension")
        if row_ptr.shape != (self.n_rows + 1,):
            raise DimensionError("row_ptr must have n_rows + 1 entries")
        nnz = col_idx.shape[0]
        if values.shape != (nnz,):
            raise DimensionError("values and col_idx lengths differ")
        if row_ptr[0] != 0 or row_ptr[-1] != nnz or np.any(np.diff(row_ptr) < 0):
            raise DimensionError("row_ptr must be non-decreasing from 0 to nnz")
        if nnz:
            if col_idx.min() < 0 or col_idx.max() >= self.n_cols:
                raise DimensionError("column index out of range")
            # strictly increasing inside each row; row starts may drop
            steps = np.diff(col_idx) > 0
            row_start = np.zeros(nnz, dtype=bool)
            row_start[row_ptr[1:-1][row_ptr[1:-1] < nnz]] = True
            if not np.all(steps | row_start[1:]):
                raise ValueError("column indices must be strictly increasing within a row "
                                 "(duplicates are rejected)")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.col_idx.shape[0])

    def row_counts(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (the COO row array)."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), self.row_counts())

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.n_rows, self.n_cols))
        rows = self.row_indices()
        on_diag = rows == self.col_idx
        d[rows[on_diag]] = self.values[on_diag]
        return d

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n_cols:
            raise DimensionError(f"vector of length {x.shape[0]} for {self.shape} matrix")
        prod = self.values * x[self.col_idx]
        out = np.zeros(self.n_rows)
        np.add.at(out, self.row_indices(), prod)
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    @classmethod
    def from_scipy(cls, m) -> "SparseCsr":
        m = m.tocsr()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_coo(cls, n_rows: int, n_cols: int, rows, cols, values) -> "SparseCsr":
        """Build from triplets; duplicate coordinates raise ``ValueError``."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape):
            raise DimensionError("triplet arrays differ in length")
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
            raise DimensionError("row index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=row_ptr[1:])
        return cls(n_rows, n_cols, row_ptr, cols, values)

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "SparseCsr":
        a = np.asarray(a, dtype=np.float64)
        rows, cols = np.nonzero(a)
        return cls.from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @classmethod
    def empty(cls, n_rows: int, n_cols: int) -> "SparseCsr":
        return cls(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int64),
                   np.zeros(0, dtype=np.int64), np.zeros(0))

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "SparseCsr":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.full(n, float(scale)))

    def same_structure(self, other: "SparseCsr") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.row_ptr, other.row_ptr)
                and np.array_equal(self.col_idx, other.col_idx))

    def __eq__(self, other):
        if not isinstance(other, SparseCsr):
            return NotImplemented
        return self.same_structure(other) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"SparseCsr({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


@dataclass(frozen=True, eq=False)
class Permutation:
    """Bijection on ``0..n-1``; ``forward[new] = old`` and ``inverse[old] = new``."""

    forward: np.ndarray
    inverse: np.ndarray

    @classmethod
    def from_forward(cls, p) -> "Permutation":
        p = np.ascontiguousarray(p, dtype=np.int64)
        n = p.shape[0]
        q = np.full(n, -1, dtype=np.int64)
        if n and (p.min() < 0 or p.max() >= n):
            raise ValueError("permutation entry out of range")
        q[p] = np.arange(n, dtype=np.int64)
        if np.any(q < 0):
            raise ValueError("not a permutation: repeated entries")
        return cls(p, q)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        ar = np.arange(n, dtype=np.int64)
        return cls(ar, ar.copy())

    @property
    def size(self) -> int:
        return int(self.forward.shape[0])

    def inverted(self) -> "Permutation":
        return Permutation(self.inverse, self.forward)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.forward, np.arange(self.size)))

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.forward, other.forward)


@dataclass
class FlopCounter:
    """Work done by one kernel invocation. A fused multiply-add counts once."""

    multiply_adds: int = 0
    divisions: int = 0

    def add(self, multiply_adds: int = 0, divisions: int = 0) -> None:
        self.multiply_adds += int(multiply_adds)
        self.divisions += int(divisions)

    def merge(self, other: "FlopCounter") -> "FlopCounter":
        self.add(other.multiply_adds, other.divisions)
        return self

    @property
    def total(self) -> int:
        return self.multiply_adds + self.divisions

    def __add__(self, other: "FlopCounter") -> "FlopCounter":
        return FlopCounter(self.multiply_adds + other.multiply_adds,
                           self.divisions + other.divisions)


def as_dense(x) -> np.ndarray:
    """Coerce to a C-ordered float64 2-D array (copying only when necessary)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got {x.ndim}-D")
    return x


def csr_to_dense(a: SparseCsr) -> np.ndarray:
    out = np.zeros((a.n_rows, a.n_cols))
    out[a.row_indices(), a.col_idx] = a.values
    return out


def transpose(a: SparseCsr) -> SparseCsr:
    if a.nnz == 0:
        return SparseCsr.empty(a.n_cols, a.n_rows)
    csc = a.to_scipy().tocsc()
    csc.sort_indices()
    return SparseCsr(a.n_cols, a.n_rows, csc.indptr, csc.indices, csc.data)


def _check_perm(p: Permutation, n: int, what: str) -> None:
    if p.size != n:
        raise DimensionError(f"permutation of length {p.size} applied to {n} {what}")


def permute_cols(a: SparseCsr, p: Permutation) -> SparseCsr:
    """Column ``c`` of ``a`` becomes column ``p.inverse[c]`` of the result."""
    _check_perm(p, a.n_cols, "columns")
    rows = a.row_indices()
    new_cols = p.inverse[a.col_idx]
    order = np.lexsort((new_cols, rows))
    return SparseCsr(a.n_rows, a.n_cols, a.row_ptr.copy(), new_cols[order], a.values[order])


def permute_rows(a: SparseCsr, p: Permutation) -> SparseCsr:
    """Row ``p.forward[i]`` of ``a`` becomes row ``i`` of the result."""
    _check_perm(p, a.n_rows, "rows")
    counts = a.row_counts()[p.forward]
    row_ptr = np.zeros(a.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    starts = a.row_ptr[p.forward]
    # source position of every entry in the new order
    src = np.repeat(starts - row_ptr[:-1], counts) + np.arange(row_ptr[-1])
    return SparseCsr(a.n_rows, a.n_cols, row_ptr, a.col_idx[src], a.values[src])


def permute_symmetric(a: SparseCsr, p: Permutation) -> SparseCsr:
    """``P A P^T``: entry ``(i, j)`` moves to ``(p.inverse[i], p.inverse[j])``."""
    if a.n_rows != a.n_cols:
        raise DimensionError("symmetric permutation needs a square matrix")
    return permute_cols(permute_rows(a, p), p)


def extract_sub_csr(a: SparseCsr, row0: int, row1: int, col0: int, col1: int) -> SparseCsr:
    """Entries inside the half-open window, reindexed to the window origin."""
    if not (0 <= row0 <= row1 <= a.n_rows and 0 <= col0 <= col1 <= a.n_cols):
        raise DimensionError(
            f"window [{row0}:{row1}, {col0}:{col1}] outside {a.n_rows}x{a.n_cols} matrix")
    lo, hi = a.row_ptr[row0], a.row_ptr[row1]
    cols = a.col_idx[lo:hi]
    keep = (cols >= col0) & (cols < col1)
    kept_before = np.zeros(hi - lo + 1, dtype=np.int64)
    np.cumsum(keep, out=kept_before[1:])
    row_ptr = kept_before[a.row_ptr[row0:row1 + 1] - lo]
    return SparseCsr(row1 - row0, col1 - col0, row_ptr, cols[keep] - col0, a.values[lo:hi][keep])


def gather_nonempty_rows(a: SparseCsr) -> tuple[SparseCsr, np.ndarray]:
    """Drop structurally empty rows. ``row_map[k]`` is the source row of row ``k``."""
    counts = a.row_counts()
    row_map = np.flatnonzero(counts)
    row_ptr = np.zeros(row_map.size + 1, dtype=np.int64)
    np.cumsum(counts[row_map], out=row_ptr[1:])
    return SparseCsr(row_map.size, a.n_cols, row_ptr, a.col_idx, a.values), row_map


def scatter_add_rows(src: np.ndarray, row_map: np.ndarray, dst: np.ndarray) -> None:
    """``dst[row_map[k], :] += src[k, :]``; ``dst`` may be a view and is updated in place."""
    row_map = np.asarray(row_map, dtype=np.int64)
    if src.shape[0] != row_map.shape[0]:
        raise DimensionError("row_map length differs from source row count")
    if row_map.size == 0:
        return
    if src.shape[1] != dst.shape[1]:
        raise DimensionError("source and destination widths differ")
    if row_map.min() < 0 or row_map.max() >= dst.shape[0]:
        raise DimensionError("row_map entry outside destination")
    # rows in row_map are distinct by construction, so fancy-index += is safe
    dst[row_map] += src


def relative_frobenius(a: np.ndarray, ref: np.ndarray) -> float:
    ref_norm = np.linalg.norm(ref)
    diff = np.linalg.norm(np.asarray(a) - np.asarray(ref))
    if ref_norm == 0.0:
        return float(diff)
    return float(diff / ref_norm)
