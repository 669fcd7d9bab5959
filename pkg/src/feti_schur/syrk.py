"""Lower triangle of ``F = Y^T Y`` for a dense, stepped ``Y``.

``input_split`` cuts ``Y`` into block rows; a block row only has nonzeros in
its leading columns (up to its right-most trail), so it contributes a SYRK to
the top-left corner of ``F`` only. ``output_split`` computes ``F`` by block
rows; the diagonal block is a SYRK of one block column of ``Y`` and the part
left of it a GEMM with the earlier columns, both starting at the block
column's highest pivot. The strict upper triangle of every result is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dsyrk

from .matrix_core import FlopCounter
from .stepped import BlockPolicy, SteppedProfile, block_boundaries, check_profile

SYRK_VARIANTS = ("baseline", "input_split", "output_split")


@dataclass(frozen=True)
class SyrkConfig:
    variant: str = "input_split"
    partition: BlockPolicy = field(default_factory=BlockPolicy)

    def __post_init__(self):
        if self.variant not in SYRK_VARIANTS:
            raise ValueError(f"unknown SYRK variant {self.variant!r}")


def _syrk_lower(y: np.ndarray) -> np.ndarray:
    """Lower triangle of ``y^T y`` (upper zero), via BLAS."""
    k, w = y.shape
    if w == 0 or k == 0:
        return np.zeros((w, w))
    # a C-ordered y is a Fortran-ordered y^T, which dsyrk takes without a copy
    return dsyrk(1.0, y.T, trans=0, lower=1)


def _syrk_count(k: int, w: int) -> int:
    return k * w * (w + 1) // 2


def syrk_baseline(Y: np.ndarray) -> tuple[np.ndarray, FlopCounter]:
    n, m = Y.shape
    F = np.ascontiguousarray(_syrk_lower(Y))
    return F, FlopCounter(_syrk_count(n, m))


def syrk_input_split(Y: np.ndarray, profile: SteppedProfile, partition: BlockPolicy,
                     check: bool = True) -> tuple[np.ndarray, FlopCounter]:
    check_profile(Y, profile, full=check)
    n, m = Y.shape
    F = np.zeros((m, m))
    flops = FlopCounter()
    for r0, r1 in block_boundaries(n, partition):
        w = int(profile.row_trails[r0:r1].max()) + 1
        if w == 0:
            continue
        F[:w, :w] += _syrk_lower(Y[r0:r1, :w])
        flops.add(_syrk_count(r1 - r0, w))
    return F, flops


def syrk_output_split(Y: np.ndarray, profile: SteppedProfile, partition: BlockPolicy,
                      check: bool = True) -> tuple[np.ndarray, FlopCounter]:
    check_profile(Y, profile, full=check)
    n, m = Y.shape
    F = np.zeros((m, m))
    flops = FlopCounter()
    for c0, c1 in block_boundaries(m, partition):
        k0 = int(profile.col_pivots[c0:c1].min())
        if k0 >= n:
            continue
        w = c1 - c0
        col_block = Y[k0:, c0:c1]
        F[c0:c1, c0:c1] = _syrk_lower(col_block)
        flops.add(_syrk_count(n - k0, w))
        if c0:
            F[c0:c1, :c0] = col_block.T @ Y[k0:, :c0]
            flops.add((n - k0) * w * c0)
    return F, flops


def syrk(Y: np.ndarray, profile: SteppedProfile | None, cfg: SyrkConfig,
         check: bool = True) -> tuple[np.ndarray, FlopCounter]:
    if cfg.variant == "baseline":
        return syrk_baseline(Y)
    if profile is None:
        raise ValueError(f"{cfg.variant} needs the stepped profile of Y")
    if cfg.variant == "input_split":
        return syrk_input_split(Y, profile, cfg.partition, check)
    return syrk_output_split(Y, profile, cfg.partition, check)
