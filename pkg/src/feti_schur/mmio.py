"""Matrix Market I/O for :class:`SparseCsr` and dense arrays.

Parsing and formatting are delegated to :mod:`scipy.io`; this module only maps
between its objects and ours and pins the header variants we emit.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.io
import scipy.sparse as sp

from .matrix_core import SparseCsr


def write_csr(path: str | os.PathLike, a: SparseCsr, symmetric: bool = False,
              comment: str = "") -> None:
    """Write ``a`` as ``coordinate real general`` (or ``symmetric``, lower triangle)."""
    m = a.to_scipy().tocoo()
    if symmetric:
        if a.n_rows != a.n_cols:
            raise ValueError("symmetric output needs a square matrix")
        m = sp.tril(m).tocoo()
    scipy.io.mmwrite(path, m, comment=comment,
                     symmetry="symmetric" if symmetric else "general")


def read_csr(path: str | os.PathLike) -> SparseCsr:
    """Read a coordinate file; symmetric files are expanded to full storage.

    Duplicate coordinates raise ``ValueError`` like any other CSR construction.
    """
    m = scipy.io.mmread(path)
    if not sp.issparse(m):
        return SparseCsr.from_dense(np.asarray(m, dtype=np.float64))
    m = sp.coo_matrix(m)
    return SparseCsr.from_coo(m.shape[0], m.shape[1], m.row, m.col, m.data)


def write_dense(path: str | os.PathLike, a: np.ndarray, comment: str = "") -> None:
    scipy.io.mmwrite(path, np.asarray(a, dtype=np.float64), comment=comment)


def read_dense(path: str | os.PathLike) -> np.ndarray:
    m = scipy.io.mmread(path)
    if sp.issparse(m):
        m = m.toarray()
    return np.ascontiguousarray(m, dtype=np.float64)
