import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from feti_schur.assembler import prepare_rhs
from feti_schur.matrix_core import (
    ConsistencyError,
    DimensionError,
    SingularError,
    SparseCsr,
    csr_to_dense,
    extract_sub_csr,
    relative_frobenius,
)
from feti_schur.stepped import BlockPolicy, compute_profile
from feti_schur.synthetic import (
    dense_lower_factor,
    random_lower_factor,
    stepped_dense,
    triangular_pivots,
)
from feti_schur.trsm import (
    TrsmConfig,
    trsm,
    trsm_baseline,
    trsm_factor_split,
    trsm_rhs_split,
    trsm_width_schedule,
)

from problems import factored

ALL = [TrsmConfig("baseline_dense"), TrsmConfig("baseline_sparse")] + [
    TrsmConfig("rhs_split", BlockPolicy.fixed_size(7), s) for s in ("sparse", "dense")] + [
    TrsmConfig("factor_split", BlockPolicy.fixed_size(7), s, pr)
    for s in ("sparse", "dense") for pr in (True, False)]


def dense_tri_count(rows, width):
    return rows * (rows - 1) // 2 * width


def offdiag(L):
    return L.nnz - L.n_rows


# --- baselines

@pytest.mark.parametrize("storage", ["sparse", "dense"])
def test_identity_factor_leaves_x(storage, rng):
    x = rng.standard_normal((5, 3))
    y = x.copy()
    trsm_baseline(SparseCsr.identity(5), y, storage)
    np.testing.assert_array_equal(y, x)


@pytest.mark.parametrize("storage", ["sparse", "dense"])
def test_hand_two_rhs(storage):
    L = SparseCsr.from_dense(np.array([[2.0, 0.0], [1.0, 1.0]]))
    x = np.array([[4.0, 8.0], [3.0, 5.0]])
    trsm_baseline(L, x, storage)
    np.testing.assert_allclose(x, [[2, 4], [1, 1]])


@pytest.mark.parametrize("storage", ["sparse", "dense"])
def test_random_factor_matches_dense_solve(storage, rng):
    a = rng.standard_normal((50, 50))
    dense_l = np.linalg.cholesky(a @ a.T + 50 * np.eye(50))
    x = rng.standard_normal((50, 8))
    ref = np.linalg.solve(dense_l, x)
    trsm_baseline(SparseCsr.from_dense(dense_l), x, storage)
    assert relative_frobenius(x, ref) < 1e-12


@pytest.mark.parametrize("storage", ["sparse", "dense"])
def test_zero_diagonal_is_singular(storage):
    L = SparseCsr(3, 3, [0, 1, 3, 4], [0, 0, 1, 2], [1.0, 1.0, 0.0, 1.0])
    with pytest.raises(SingularError) as err:
        trsm_baseline(L, np.ones((3, 2)), storage)
    assert err.value.row == 1


def test_operand_checks():
    with pytest.raises(DimensionError):
        trsm_baseline(SparseCsr.identity(3), np.ones((2, 2)))
    with pytest.raises(TypeError):
        trsm_baseline(SparseCsr.identity(2), np.ones((2, 2), dtype=np.float32))


def test_baseline_flop_counts(rng):
    L = random_lower_factor(rng, 20, 0.3)
    x = rng.standard_normal((20, 4))
    assert trsm_baseline(L, x.copy(), "dense").multiply_adds == dense_tri_count(20, 4)
    f = trsm_baseline(L, x.copy(), "sparse")
    assert (f.multiply_adds, f.divisions) == (offdiag(L) * 4, 80)


# --- rhs split

@pytest.mark.parametrize("storage", ["sparse", "dense"])
def test_rhs_split_single_block_counts_from_min_pivot(storage, rng):
    n, m = 30, 6
    L = random_lower_factor(rng, n, 0.3)
    x = stepped_dense(rng, n, m, np.array([4, 6, 9, 9, 20, 25]))
    f = trsm_rhs_split(L, x, compute_profile(x), BlockPolicy.fixed_count(1), storage)
    if storage == "dense":
        assert f.multiply_adds == dense_tri_count(n - 4, m)
    else:
        assert f.multiply_adds == offdiag(extract_sub_csr(L, 4, n, 4, n)) * m


def test_rhs_split_two_blocks_half_size(rng):
    n, m = 40, 6
    L = dense_lower_factor(rng, n)
    x = stepped_dense(rng, n, m, np.array([0, 0, 0, n // 2, n // 2, n // 2]))
    ref = x.copy()
    base = trsm_baseline(L, ref, "dense")
    f = trsm_rhs_split(L, x, compute_profile(x), BlockPolicy.fixed_count(2), "dense")
    assert f.multiply_adds == dense_tri_count(n, 3) + dense_tri_count(n // 2, 3)
    assert f.multiply_adds < base.multiply_adds
    assert relative_frobenius(x, ref) < 1e-13


def test_rhs_split_generated_3d():
    p, fb = factored(3, 343)
    staged = prepare_rhs(p, fb)
    ref = staged.y.copy()
    base = trsm_baseline(fb.L, ref, "sparse")
    for storage in ("sparse", "dense"):
        y = staged.y.copy()
        f = trsm_rhs_split(fb.L, y, staged.profile, BlockPolicy.fixed_size(20), storage)
        assert relative_frobenius(y, ref) < 1e-13
        cmp = base if storage == "sparse" else trsm_baseline(fb.L, staged.y.copy(), "dense")
        assert f.multiply_adds <= cmp.multiply_adds


def test_profile_mismatch_raises(rng):
    x = stepped_dense(rng, 6, 3, np.array([2, 3, 4]))
    wrong = compute_profile(stepped_dense(rng, 6, 3, np.array([3, 3, 4])))
    for fn in (trsm_rhs_split, trsm_factor_split):
        with pytest.raises(ConsistencyError):
            fn(SparseCsr.identity(6), x.copy(), wrong, BlockPolicy.fixed_size(2))
    with pytest.raises(ValueError):
        trsm(SparseCsr.identity(6), x, None, TrsmConfig("rhs_split"))


# --- factor split

@pytest.mark.parametrize("storage", ["sparse", "dense"])
def test_factor_split_single_block_is_baseline(storage, rng):
    L = random_lower_factor(rng, 25, 0.3)
    x = stepped_dense(rng, 25, 5, np.zeros(5, dtype=int))
    ref = x.copy()
    base = trsm_baseline(L, ref, storage)
    f = trsm_factor_split(L, x, compute_profile(x), BlockPolicy.fixed_count(1), storage)
    assert f == base
    assert relative_frobenius(x, ref) < 1e-14


@pytest.mark.parametrize("storage", ["sparse", "dense"])
@pytest.mark.parametrize("pruning", [True, False])
def test_factor_split_hand_case(storage, pruning):
    L = SparseCsr.from_dense(np.array([[1.0, 0, 0], [0, 1, 0], [1, 1, 1]]))
    x = np.array([[1.0], [1.0], [0.0]])
    trsm_factor_split(L, x, compute_profile(x), BlockPolicy.fixed_size(2), storage, pruning)
    np.testing.assert_array_equal(x, [[1], [1], [-2]])


def test_factor_split_pruning_on_3d_subdomain():
    p, fb = factored(3, 1331)
    staged = prepare_rhs(p, fb)
    part = BlockPolicy.fixed_size(100)
    for storage in ("sparse", "dense"):
        on, off = staged.y.copy(), staged.y.copy()
        f_on = trsm_factor_split(fb.L, on, staged.profile, part, storage, True, Lt=fb.Lt)
        f_off = trsm_factor_split(fb.L, off, staged.profile, part, storage, False, Lt=fb.Lt)
        assert relative_frobenius(on, off) < 1e-13
        assert f_on.multiply_adds <= f_off.multiply_adds
    assert f_on.multiply_adds < f_off.multiply_adds


def test_factor_split_builds_transpose_when_missing(rng):
    L = random_lower_factor(rng, 30, 0.2)
    x = stepped_dense(rng, 30, 8)
    ref = x.copy()
    trsm_baseline(L, ref)
    trsm_factor_split(L, x, compute_profile(x), BlockPolicy.fixed_size(4), "dense")
    assert relative_frobenius(x, ref) < 1e-13


# --- width schedule

def test_width_dense_x():
    prof = compute_profile(np.ones((10, 4)))
    np.testing.assert_array_equal(trsm_width_schedule(prof, BlockPolicy.fixed_size(3)), [4] * 4)


def test_width_triangular():
    n, s = 12, 3
    x = stepped_dense(np.random.default_rng(1), n, n, triangular_pivots(n, n))
    widths = trsm_width_schedule(compute_profile(x), BlockPolicy.fixed_size(s))
    np.testing.assert_array_equal(widths, [3, 6, 9, 12])


@given(st.integers(0, 10**6))
def test_width_non_decreasing(seed):
    rng = np.random.default_rng(seed)
    x = stepped_dense(rng, int(rng.integers(1, 40)), int(rng.integers(1, 20)), density=0.5)
    widths = trsm_width_schedule(compute_profile(x), BlockPolicy.fixed_size(int(rng.integers(1, 9))))
    assert np.all(np.diff(widths) >= 0)


# --- invariants

@given(st.integers(0, 10**6), st.integers(1, 12))
def test_zero_preservation_and_equivalence(seed, block):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 40)), int(rng.integers(1, 25))
    L = random_lower_factor(rng, n, float(rng.uniform(0.05, 0.6)))
    x0 = stepped_dense(rng, n, m, density=float(rng.uniform(0.1, 1.0)))
    prof = compute_profile(x0)
    above = np.arange(n)[:, None] < prof.col_pivots[None, :]
    ref = x0.copy()
    trsm_baseline(L, ref)
    for cfg in ALL:
        cfg = TrsmConfig(cfg.variant, BlockPolicy.fixed_size(block), cfg.factor_block_storage, cfg.pruning)
        x = x0.copy()
        trsm(L, x, prof, cfg)
        assert np.all(x[above] == 0.0) and not np.signbit(x[above]).any()
        assert relative_frobenius(x, ref) < 1e-13


@pytest.mark.parametrize("dim,n", [(2, 49), (2, 289), (3, 64), (3, 343)])
def test_variants_agree_on_generated_subdomains(dim, n):
    p, fb = factored(dim, n)
    staged = prepare_rhs(p, fb)
    ref = staged.y.copy()
    trsm_baseline(fb.L, ref)
    for part in (BlockPolicy.fixed_size(16), BlockPolicy.fixed_count(3)):
        for cfg in ALL:
            cfg = TrsmConfig(cfg.variant, part, cfg.factor_block_storage, cfg.pruning)
            y = staged.y.copy()
            trsm(fb.L, y, staged.profile, cfg, Lt=fb.Lt)
            assert relative_frobenius(y, ref) < 1e-13, cfg


def test_flop_counts_are_deterministic():
    p, fb = factored(3, 343)
    staged = prepare_rhs(p, fb)
    cfg = TrsmConfig("factor_split", BlockPolicy.fixed_size(50), "dense", True)
    counts = {trsm(fb.L, staged.y.copy(), staged.profile, cfg).total for _ in range(3)}
    assert len(counts) == 1


def test_ideal_ratio_at_block_n_over_64(rng):
    n = 512
    L = dense_lower_factor(rng, n)
    x = stepped_dense(rng, n, n, triangular_pivots(n, n))
    prof = compute_profile(x)
    base = trsm_baseline(L, x.copy(), "dense")
    split = trsm_rhs_split(L, x.copy(), prof, BlockPolicy.fixed_size(n // 64), "dense")
    assert base.multiply_adds / split.multiply_adds >= 2.7
