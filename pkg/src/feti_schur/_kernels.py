"""Compiled scalar loops: elimination tree, up-looking Cholesky, sparse triangular
solves and sparse-times-dense updates.

Every kernel takes raw CSR arrays. Dense operands are 2-D float64 arrays that
may be strided views; they are updated in place. A kernel that finds a zero
diagonal returns the offending row instead of raising (numba ``nogil`` code
cannot raise our exception types); callers translate that.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def etree(n, row_ptr, col_idx):
    """Elimination tree of a symmetric matrix given its lower triangle by rows."""
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        for p in range(row_ptr[k], row_ptr[k + 1]):
            i = col_idx[p]
            while i != -1 and i < k:
                nxt = ancestor[i]
                ancestor[i] = k
                if nxt == -1:
                    parent[i] = k
                i = nxt
    return parent


@njit(**_JIT)
def symbolic_rows(n, row_ptr, col_idx, parent):
    """Row pattern of L (diagonal included, sorted) via elimination-tree reaches."""
    mark = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    # first pass: counts
    for k in range(n):
        mark[k] = k
        c = 1
        for p in range(row_ptr[k], row_ptr[k + 1]):
            i = col_idx[p]
            if i >= k:
                continue
            while mark[i] != k:
                mark[i] = k
                c += 1
                i = parent[i]
        counts[k] = c
    l_ptr = np.zeros(n + 1, dtype=np.int64)
    for k in range(n):
        l_ptr[k + 1] = l_ptr[k] + counts[k]
    l_idx = np.empty(l_ptr[n], dtype=np.int64)
    mark[:] = -1
    for k in range(n):
        mark[k] = k
        top = l_ptr[k]
        for p in range(row_ptr[k], row_ptr[k + 1]):
            i = col_idx[p]
            if i >= k:
                continue
            while mark[i] != k:
                mark[i] = k
                l_idx[top] = i
                top += 1
                i = parent[i]
        l_idx[top] = k
        l_idx[l_ptr[k]:l_ptr[k + 1]].sort()
    return l_ptr, l_idx


@njit(**_JIT)
def cholesky_up(n, a_ptr, a_idx, a_val, l_ptr, l_idx):
    """Up-looking Cholesky into a precomputed CSR pattern.

    ``a_*`` holds the lower triangle of the (already permuted) matrix by rows.
    Returns ``(values, failed_row, pivot)``; ``failed_row`` is -1 on success.
    """
    l_val = np.zeros(l_idx.shape[0])
    x = np.zeros(n)
    for k in range(n):
        for p in range(a_ptr[k], a_ptr[k + 1]):
            j = a_idx[p]
            if j <= k:
                x[j] = a_val[p]
        d = x[k]
        x[k] = 0.0
        # pattern of row k minus the diagonal, ascending = topological order
        for q in range(l_ptr[k], l_ptr[k + 1] - 1):
            j = l_idx[q]
            s = x[j]
            for r in range(l_ptr[j], l_ptr[j + 1] - 1):
                s -= l_val[r] * x[l_idx[r]]
            s /= l_val[l_ptr[j + 1] - 1]
            x[j] = s
        for q in range(l_ptr[k], l_ptr[k + 1] - 1):
            j = l_idx[q]
            v = x[j]
            l_val[q] = v
            d -= v * v
            x[j] = 0.0
        if not d > 0.0:
            return l_val, k, d
        l_val[l_ptr[k + 1] - 1] = np.sqrt(d)
    return l_val, -1, 0.0


@njit(**_JIT)
def csr_lower_solve(row_ptr, col_idx, values, x):
    """Forward substitution ``L X = B`` in place on the rows of ``x`` (2-D)."""
    n = row_ptr.shape[0] - 1
    w = x.shape[1]
    for i in range(n):
        diag = 0.0
        for p in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[p]
            if j < i:
                v = values[p]
                for c in range(w):
                    x[i, c] -= v * x[j, c]
            elif j == i:
                diag = values[p]
        if diag == 0.0:
            return i
        for c in range(w):
            x[i, c] /= diag
    return -1


@njit(**_JIT)
def csr_lower_solve_vec(row_ptr, col_idx, values, x):
    n = row_ptr.shape[0] - 1
    for i in range(n):
        diag = 0.0
        s = x[i]
        for p in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[p]
            if j < i:
                s -= values[p] * x[j]
            elif j == i:
                diag = values[p]
        if diag == 0.0:
            return i
        x[i] = s / diag
    return -1


@njit(**_JIT)
def csr_lower_transposed_solve_vec(row_ptr, col_idx, values, x):
    """Backward substitution ``L^T x = b`` reading L by rows (column-oriented sweep)."""
    n = row_ptr.shape[0] - 1
    for i in range(n - 1, -1, -1):
        diag = 0.0
        for p in range(row_ptr[i], row_ptr[i + 1]):
            if col_idx[p] == i:
                diag = values[p]
        if diag == 0.0:
            return i
        xi = x[i] / diag
        x[i] = xi
        for p in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[p]
            if j < i:
                x[j] -= values[p] * xi
    return -1


@njit(**_JIT)
def csr_sub_matmul(row_ptr, col_idx, values, rhs, out, row_map):
    """``out[row_map[i], :] -= A[i, :] @ rhs`` for every row of the CSR matrix A."""
    n = row_ptr.shape[0] - 1
    w = rhs.shape[1]
    for i in range(n):
        t = row_map[i]
        for p in range(row_ptr[i], row_ptr[i + 1]):
            v = values[p]
            j = col_idx[p]
            for c in range(w):
                out[t, c] -= v * rhs[j, c]
