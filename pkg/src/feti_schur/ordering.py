"""Fill-reducing orderings for symmetric sparsity patterns.

``amd`` is an approximate minimum degree ordering on the quotient graph
(variables plus elements formed by eliminated pivots). Degrees use the
Amestoy-Davis-Duff upper bound; elements whose remaining variables are covered
by the new pivot element are absorbed. There is no supervariable detection,
which only costs speed at these problem sizes.
"""

from __future__ import annotations

import heapq

import numpy as np

from .matrix_core import DimensionError, Permutation, SparseCsr

ORDERINGS = ("amd", "rcm", "natural")


def _adjacency(k: SparseCsr) -> list[set[int]]:
    if k.n_rows != k.n_cols:
        raise DimensionError(f"ordering needs a square matrix, got {k.n_rows}x{k.n_cols}")
    rows = k.row_indices()
    cols = k.col_idx
    off = rows != cols
    adj: list[set[int]] = [set() for _ in range(k.n_rows)]
    for i, j in zip(rows[off].tolist(), cols[off].tolist()):
        adj[i].add(j)
        adj[j].add(i)
    return adj


def amd(k: SparseCsr) -> Permutation:
    n = k.n_rows
    adj = _adjacency(k)
    elems: list[set[int]] = [set() for _ in range(n)]
    members: dict[int, set[int]] = {}  # element id (its pivot) -> variables
    degree = [len(a) for a in adj]
    alive = [True] * n
    heap = [(degree[i], i) for i in range(n)]
    heapq.heapify(heap)
    order: list[int] = []
    remaining = n

    while heap:
        d, p = heapq.heappop(heap)
        if not alive[p] or d != degree[p]:
            continue
        alive[p] = False
        order.append(p)
        remaining -= 1

        lp = set(adj[p])
        for e in elems[p]:
            lp |= members.pop(e)
        lp.discard(p)
        absorbed = elems[p]
        members[p] = lp
        adj[p] = set()
        elems[p] = set()

        for i in lp:
            adj[i] -= lp
            adj[i].discard(p)
            elems[i] -= absorbed
            elems[i].add(p)

        # |Le \ Lp| for every element reachable from Lp
        outside: dict[int, int] = {}
        for i in lp:
            for e in elems[i]:
                if e == p:
                    continue
                if e not in outside:
                    outside[e] = len(members[e])
                outside[e] -= 1
        for e, cnt in outside.items():
            if cnt == 0:
                # Le is a subset of Lp: fold it into the new element
                for i in members.pop(e):
                    elems[i].discard(e)

        lp_size = len(lp)
        for i in lp:
            ext = sum(outside[e] for e in elems[i] if e != p)
            bound = len(adj[i]) + (lp_size - 1) + ext
            new_d = min(remaining - 1, degree[i] + lp_size - 1, bound)
            if new_d != degree[i]:
                degree[i] = new_d
                heapq.heappush(heap, (new_d, i))
    return Permutation.from_forward(np.asarray(order, dtype=np.int64))


def rcm(k: SparseCsr) -> Permutation:
    from scipy.sparse.csgraph import reverse_cuthill_mckee

    if k.n_rows != k.n_cols:
        raise DimensionError("ordering needs a square matrix")
    return Permutation.from_forward(
        reverse_cuthill_mckee(k.to_scipy(), symmetric_mode=True).astype(np.int64))


def delay_marked(parent: np.ndarray, marked: np.ndarray) -> np.ndarray:
    """Topological order of an elimination tree that puts marked nodes as late as possible.

    Every child still precedes its parent, so applying the result on top of the
    ordering that produced ``parent`` gives an equivalent ordering: the factor
    has exactly the same fill. Returns ``order`` with ``order[k]`` the tree node
    placed at position ``k``.
    """
    parent = np.asarray(parent, dtype=np.int64)
    marked = np.asarray(marked, dtype=bool)
    n = parent.shape[0]
    if marked.shape != (n,):
        raise DimensionError("marker length differs from the tree size")
    pending = np.bincount(parent[parent >= 0], minlength=n).tolist()
    flags = marked.tolist()
    par = parent.tolist()
    heap = [(flags[j], j) for j in range(n) if pending[j] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, j = heapq.heappop(heap)
        order.append(j)
        q = par[j]
        if q >= 0:
            pending[q] -= 1
            if pending[q] == 0:
                heapq.heappush(heap, (flags[q], q))
    return np.asarray(order, dtype=np.int64)


def fill_reducing_order(k: SparseCsr, method: str = "amd") -> Permutation:
    """Symmetric ordering of ``k``; ``method`` is one of ``amd``, ``rcm``, ``natural``."""
    if k.n_rows != k.n_cols:
        raise DimensionError(f"ordering needs a square matrix, got {k.n_rows}x{k.n_cols}")
    if method == "amd":
        return amd(k)
    if method == "rcm":
        return rcm(k)
    if method == "natural":
        return Permutation.identity(k.n_rows)
    raise ValueError(f"unknown ordering {method!r}; expected one of {ORDERINGS}")
