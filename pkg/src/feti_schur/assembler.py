"""Explicit local dual operators ``F~ = B~ K_reg^{-1} B~^T`` and their application.

Assembly pipeline for one subdomain, given ``P K_reg P^T = L L^T``:

1. reorder the rows of ``B~^T`` with ``P``;
2. sort its columns into the stepped shape;
3. densify into ``Y``;
4. ``Y <- L^{-1} Y`` (TRSM);
5. ``F' = Y^T Y`` (SYRK, lower triangle);
6. mirror ``F'`` and undo the column sort on rows and columns.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cholesky import FactorBundle, factorize, trsv_lower
from .matrix_core import (
    DimensionError,
    FlopCounter,
    NotSPDError,
    Permutation,
    csr_to_dense,
    permute_cols,
    permute_rows,
)
from .problem import SubdomainProblem
from .stepped import SteppedProfile, compute_profile, stepped_permutation
from .syrk import SyrkConfig, syrk
from .trsm import TrsmConfig, trsm


@dataclass(frozen=True)
class AssemblyConfig:
    trsm: TrsmConfig = field(default_factory=TrsmConfig)
    syrk: SyrkConfig = field(default_factory=SyrkConfig)
    compare_oracle: bool = False
    stepped: bool = True  # False keeps the original multiplier order (for testing)

    @classmethod
    def baseline(cls) -> "AssemblyConfig":
        return cls(TrsmConfig("baseline_dense"), SyrkConfig("baseline"))

    @classmethod
    def for_dim(cls, dim: int, **kw) -> "AssemblyConfig":
        return cls(TrsmConfig.for_dim(dim), SyrkConfig("input_split"), **kw)

    @property
    def label(self) -> str:
        return f"{self.trsm.label}+{self.syrk.variant}"


@dataclass(eq=False)
class ExplicitOperator:
    f: np.ndarray
    lambda_map: np.ndarray
    flops_trsm: FlopCounter = field(default_factory=FlopCounter)
    flops_syrk: FlopCounter = field(default_factory=FlopCounter)
    oracle_rel_err: float | None = None

    @property
    def m(self) -> int:
        return self.f.shape[0]


@dataclass(frozen=True)
class AmortizationInputs:
    t_assembly_extra: float
    t_apply_implicit: float
    t_apply_explicit: float

    def __post_init__(self):
        if min(self.t_assembly_extra, self.t_apply_implicit, self.t_apply_explicit) < 0:
            raise ValueError("times must be non-negative")


@dataclass
class StagedAssembly:
    """Intermediate state of :func:`assemble_explicit`, exposed for benchmarking."""

    y: np.ndarray
    profile: SteppedProfile
    col_perm: Permutation


def factorize_subdomain(p: SubdomainProblem, ordering: str = "amd",
                        delay_glued: bool = True) -> FactorBundle:
    """Factor ``K_reg`` of ``p``.

    With ``delay_glued`` the DOFs carrying multipliers are eliminated as late
    as the elimination tree allows. The fill is the same, but the column
    pivots of the reordered ``B~^T`` move down, which is where the split
    kernels save work.
    """
    late = p.bt.row_counts() > 0 if delay_glued else None
    return factorize(p.k_reg, ordering, late)


def prepare_rhs(p: SubdomainProblem, fb: FactorBundle, stepped: bool = True) -> StagedAssembly:
    """Steps 1-3: permuted, column-sorted, densified ``B~^T`` with its profile."""
    if fb.n != p.n:
        raise DimensionError(f"factor of order {fb.n} for subdomain with {p.n} DOFs")
    btp = permute_rows(p.bt, fb.perm)
    col_perm = stepped_permutation(btp) if stepped else Permutation.identity(btp.n_cols)
    btps = permute_cols(btp, col_perm)
    return StagedAssembly(csr_to_dense(btps), compute_profile(btps), col_perm)


def finish_operator(f_lower: np.ndarray, col_perm: Permutation) -> np.ndarray:
    """Step 6: full symmetric storage in the original multiplier order."""
    full = f_lower + np.tril(f_lower, -1).T
    out = np.empty_like(full)
    p = col_perm.forward
    out[np.ix_(p, p)] = full
    return out


def assemble_explicit(p: SubdomainProblem, fb: FactorBundle,
                      cfg: AssemblyConfig | None = None) -> ExplicitOperator:
    cfg = cfg or AssemblyConfig()
    staged = prepare_rhs(p, fb, cfg.stepped)
    y = staged.y
    flops_t = trsm(fb.L, y, staged.profile, cfg.trsm, check=False, Lt=fb.Lt)
    f_lower, flops_s = syrk(y, staged.profile.filled(), cfg.syrk, check=False)
    op = ExplicitOperator(finish_operator(f_lower, staged.col_perm), p.lambda_map.copy(),
                          flops_t, flops_s)
    if cfg.compare_oracle:
        ref = oracle_sc(p)
        denom = np.linalg.norm(ref)
        diff = np.linalg.norm(op.f - ref)
        op.oracle_rel_err = float(diff / denom) if denom else float(diff)
    return op


def worker_count() -> int:
    cap = os.environ.get("SCHUR_THREADS")
    cores = os.cpu_count() or 1
    if cap:
        return max(1, min(int(cap), cores))
    return cores


def assemble_all(problems, factors, cfg: AssemblyConfig | None = None,
                 workers: int | None = None) -> list[ExplicitOperator]:
    """Assemble every subdomain, concurrently on a bounded thread pool."""
    workers = workers or worker_count()
    if workers == 1 or len(problems) <= 1:
        return [assemble_explicit(p, fb, cfg) for p, fb in zip(problems, factors)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda pf: assemble_explicit(pf[0], pf[1], cfg),
                             zip(problems, factors)))


def oracle_sc(p: SubdomainProblem) -> np.ndarray:
    """Dense reference ``B~ K^{-1} B~^T`` (LAPACK Cholesky, no blocking, no reordering)."""
    k = csr_to_dense(p.k_reg)
    bt = csr_to_dense(p.bt)
    if bt.shape[1] == 0:
        return np.zeros((0, 0))
    try:
        c = scipy.linalg.cho_factor(k, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(-1, float("nan")) from exc
    return bt.T @ scipy.linalg.cho_solve(c, bt, check_finite=False)


def apply_implicit(p: SubdomainProblem, fb: FactorBundle,
                   lam: np.ndarray) -> tuple[np.ndarray, FlopCounter]:
    """``B~ (L^{-T} (L^{-1} (B~^T lam)))`` with the ordering applied around the solves."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (p.m,):
        raise DimensionError(f"dual vector of shape {lam.shape} for {p.m} multipliers")
    perm = fb.perm.forward
    x = p.bt.matvec(lam)
    y = trsv_lower(fb.L, x[perm])
    z = trsv_lower(fb.L, y, transpose=True)
    u = np.empty_like(z)
    u[perm] = z
    q = np.zeros(p.m)
    np.add.at(q, p.bt.col_idx, p.bt.values * u[p.bt.row_indices()])
    n, nnz_l = fb.n, fb.L.nnz
    return q, FlopCounter(2 * p.bt.nnz + 2 * (nnz_l - n), 2 * n)


def apply_explicit(op: ExplicitOperator, lam: np.ndarray) -> tuple[np.ndarray, FlopCounter]:
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (op.m,):
        raise DimensionError(f"dual vector of shape {lam.shape} for {op.m} multipliers")
    return op.f @ lam, FlopCounter(op.m * op.m)


def amortization_point(a: AmortizationInputs) -> float | int:
    """Fewest iterations ``k`` with ``extra + k * t_expl < k * t_impl`` (``inf`` if none)."""
    saving = a.t_apply_implicit - a.t_apply_explicit
    if saving <= 0:
        return math.inf
    k = max(1, math.floor(a.t_assembly_extra / saving) + 1)
    # guard the floor against rounding in the division
    while k > 1 and a.t_assembly_extra < (k - 1) * saving:
        k -= 1
    while not a.t_assembly_extra < k * saving:
        k += 1
    return k
