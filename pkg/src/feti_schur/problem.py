"""Structured heat-transfer FETI problems on the unit square / cube.

The global mesh has ``subdomains_per_edge * elements_per_edge`` elements per
edge; every subdomain is a block of ``elements_per_edge`` elements per edge and
owns its own copy of the nodes on its boundary, so each subdomain has
``(elements_per_edge + 1) ** dim`` DOFs. Squares are split into two triangles
along the (0,0)-(1,1) diagonal, cubes into six Kuhn tetrahedra, so neighbouring
meshes are conforming.

A node shared by subdomains ``s_0 < s_1 < ... < s_k`` is glued by the chain of
constraints ``u[s_j] - u[s_{j+1}] = 0``; multipliers are numbered by global node
and then by position in the chain.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .matrix_core import SparseCsr


class DegenerateElementError(ValueError):
    pass


@dataclass(frozen=True)
class DecompositionSpec:
    dim: int = 2
    elements_per_edge: int = 2
    subdomains_per_edge: int = 2
    regularization_rho: float = 1.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.elements_per_edge < 1 or self.subdomains_per_edge < 1:
            raise ValueError("element and subdomain counts must be >= 1")
        if not self.regularization_rho > 0:
            raise ValueError("regularization_rho must be positive")

    @property
    def dofs_per_subdomain(self) -> int:
        return (self.elements_per_edge + 1) ** self.dim

    @classmethod
    def for_size(cls, dim: int, n: int, subdomains_per_edge: int = 2,
                 regularization_rho: float = 1.0) -> "DecompositionSpec":
        """Spec whose subdomains have exactly ``n`` DOFs (``n`` must be a perfect power)."""
        side = int(round(n ** (1.0 / dim)))
        if side < 2 or side ** dim != n:
            raise ValueError(f"{n} is not (k+1)**{dim} for any k >= 1")
        return cls(dim, side - 1, subdomains_per_edge, regularization_rho)


@dataclass(eq=False)
class SubdomainProblem:
    """One subdomain: regularized stiffness and the transposed gluing block.

    ``bt`` is ``n x m_i``; column ``j`` glues the local DOF holding its single
    nonzero to global multiplier ``lambda_map[j]``.
    """

    k_reg: SparseCsr
    bt: SparseCsr
    lambda_map: np.ndarray
    nodes: np.ndarray = field(repr=False)  # global node index of every local DOF
    index: int = 0

    @property
    def n(self) -> int:
        return self.k_reg.n_rows

    @property
    def m(self) -> int:
        return self.bt.n_cols


@dataclass(eq=False)
class Decomposition:
    spec: DecompositionSpec
    subdomains: list[SubdomainProblem]
    n_multipliers: int
    node_coords: np.ndarray = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return sum(s.n for s in self.subdomains)

    def global_b(self) -> SparseCsr:
        """Global gluing matrix ``B`` (multipliers x stacked subdomain DOFs)."""
        rows, cols, vals = [], [], []
        offset = 0
        for sub in self.subdomains:
            bt = sub.bt
            rows.append(sub.lambda_map[bt.col_idx])
            cols.append(bt.row_indices() + offset)
            vals.append(bt.values)
            offset += sub.n
        return SparseCsr.from_coo(self.n_multipliers, offset,
                                  np.concatenate(rows) if rows else [],
                                  np.concatenate(cols) if cols else [],
                                  np.concatenate(vals) if vals else [])


def element_stiffness_2d(coords) -> np.ndarray:
    """P1 Laplace stiffness of a triangle given as a 3x2 array of vertices."""
    x = np.asarray(coords, dtype=np.float64).reshape(3, 2)
    jac = np.array([x[1] - x[0], x[2] - x[0]]).T
    det = np.linalg.det(jac)
    if abs(det) <= 1e-14 * max(1.0, np.abs(jac).max() ** 2):
        raise DegenerateElementError("triangle has zero area")
    ref_grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = ref_grads @ np.linalg.inv(jac)
    return 0.5 * abs(det) * grads @ grads.T


def element_stiffness_3d(coords) -> np.ndarray:
    """P1 Laplace stiffness of a tetrahedron given as a 4x3 array of vertices."""
    x = np.asarray(coords, dtype=np.float64).reshape(4, 3)
    jac = np.array([x[1] - x[0], x[2] - x[0], x[3] - x[0]]).T
    det = np.linalg.det(jac)
    if abs(det) <= 1e-14 * max(1.0, np.abs(jac).max() ** 3):
        raise DegenerateElementError("tetrahedron has zero volume")
    ref_grads = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    grads = ref_grads @ np.linalg.inv(jac)
    return abs(det) / 6.0 * grads @ grads.T


def regularize(k: SparseCsr, rho: float) -> SparseCsr:
    """Ground node 0: add ``rho * trace(k) / n`` to ``k[0, 0]`` (pattern unchanged)."""
    if not rho > 0:
        raise ValueError(f"regularization parameter must be positive, got {rho}")
    n = k.n_rows
    if n == 0:
        return k
    start, stop = k.row_ptr[0], k.row_ptr[1]
    hit = np.flatnonzero(k.col_idx[start:stop] == 0)
    if hit.size == 0:
        raise ValueError("k[0, 0] is not stored; cannot regularize without changing the pattern")
    values = k.values.copy()
    values[start + hit[0]] += rho * k.diagonal().sum() / n
    return SparseCsr(k.n_rows, k.n_cols, k.row_ptr, k.col_idx, values)


def _local_cells(dim: int, e: int):
    """Element connectivity of one subdomain in local lexicographic numbering."""
    side = e + 1
    strides = [side ** d for d in range(dim)]
    cells = []
    if dim == 2:
        for cy in range(e):
            for cx in range(e):
                v00 = cx + side * cy
                v10, v01, v11 = v00 + 1, v00 + side, v00 + side + 1
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
    else:
        for cz, cy, cx in itertools.product(range(e), repeat=3):
            base = cx + side * cy + side * side * cz
            for axes in itertools.permutations(range(3)):
                tet = [base]
                v = base
                for a in axes:
                    v += strides[a]
                    tet.append(v)
                cells.append(tuple(tet))
    return np.asarray(cells, dtype=np.int64)


def _subdomain_stiffness(dim: int, e: int, h: float) -> SparseCsr:
    side = e + 1
    n = side ** dim
    cells = _local_cells(dim, e)
    grid = np.stack(np.unravel_index(np.arange(n), (side,) * dim)[::-1], axis=1) * h
    stiffness = element_stiffness_2d if dim == 2 else element_stiffness_3d
    rows, cols, vals = [], [], []
    for cell in cells:
        ke = stiffness(grid[cell])
        rows.append(np.repeat(cell, dim + 1))
        cols.append(np.tile(cell, dim + 1))
        vals.append(ke.ravel())
    k = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    k.sum_duplicates()
    return SparseCsr.from_scipy(k)


def generate(spec: DecompositionSpec) -> Decomposition:
    """Build every subdomain's ``K_reg`` and ``B~^T`` for ``spec``."""
    dim, e, s = spec.dim, spec.elements_per_edge, spec.subdomains_per_edge
    g_side = s * e + 1
    h = 1.0 / (s * e)
    side = e + 1
    n_local = side ** dim

    # every subdomain is the same translated block, so K is shared
    k_reg = regularize(_subdomain_stiffness(dim, e, h), spec.regularization_rho)

    local_multi = np.stack(np.unravel_index(np.arange(n_local), (side,) * dim)[::-1], axis=1)
    g_strides = np.array([g_side ** d for d in range(dim)], dtype=np.int64)
    sub_nodes = []
    for sub_idx in range(s ** dim):
        origin = np.array(np.unravel_index(sub_idx, (s,) * dim)[::-1], dtype=np.int64) * e
        sub_nodes.append((local_multi + origin) @ g_strides)

    owners: dict[int, list[tuple[int, int]]] = {}
    for sub_idx, nodes in enumerate(sub_nodes):
        for local, g in enumerate(nodes.tolist()):
            owners.setdefault(g, []).append((sub_idx, local))

    # per-subdomain (local dof, sign, multiplier) triplets
    glue: list[list[tuple[int, float, int]]] = [[] for _ in sub_nodes]
    n_mult = 0
    for g in sorted(owners):
        chain = owners[g]
        for (sa, la), (sb, lb) in zip(chain, chain[1:]):
            glue[sa].append((la, 1.0, n_mult))
            glue[sb].append((lb, -1.0, n_mult))
            n_mult += 1

    subdomains = []
    for sub_idx, nodes in enumerate(sub_nodes):
        entries = glue[sub_idx]
        m_i = len(entries)
        dofs = np.array([t[0] for t in entries], dtype=np.int64)
        signs = np.array([t[1] for t in entries], dtype=np.float64)
        lmap = np.array([t[2] for t in entries], dtype=np.int64)
        bt = SparseCsr.from_coo(n_local, m_i, dofs, np.arange(m_i), signs)
        subdomains.append(SubdomainProblem(k_reg, bt, lmap, nodes, sub_idx))

    coords = np.stack(np.unravel_index(np.arange(g_side ** dim), (g_side,) * dim)[::-1],
                      axis=1) * h
    return Decomposition(spec, subdomains, n_mult, coords)
