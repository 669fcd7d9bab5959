"""Explicit assembly of FETI local dual operators with stepped-shape TRSM and SYRK.

The usual entry points::

    from feti_schur import generate, DecompositionSpec, factorize_subdomain, assemble_explicit
    dec = generate(DecompositionSpec(dim=3, elements_per_edge=10))
    p = dec.subdomains[0]
    op = assemble_explicit(p, factorize_subdomain(p), AssemblyConfig.for_dim(3))
"""

from .assembler import (
    AmortizationInputs,
    AssemblyConfig,
    ExplicitOperator,
    amortization_point,
    apply_explicit,
    apply_implicit,
    assemble_all,
    assemble_explicit,
    factorize_subdomain,
    oracle_sc,
)
from .cholesky import FactorBundle, factorize, numeric_factor, solve, symbolic_factor, trsv_lower
from .matrix_core import (
    ConsistencyError,
    DimensionError,
    FlopCounter,
    NotSPDError,
    Permutation,
    SingularError,
    SparseCsr,
)
from .ordering import fill_reducing_order
from .problem import Decomposition, DecompositionSpec, SubdomainProblem, generate
from .stepped import BlockPolicy, SteppedProfile, block_boundaries, compute_profile
from .syrk import SyrkConfig, syrk
from .trsm import TrsmConfig, trsm

__version__ = "0.1.0"
