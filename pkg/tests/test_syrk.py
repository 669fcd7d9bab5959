import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from feti_schur.assembler import prepare_rhs
from feti_schur.matrix_core import ConsistencyError, relative_frobenius
from feti_schur.stepped import BlockPolicy, compute_profile
from feti_schur.synthetic import random_lower_factor, stepped_dense, triangular_pivots
from feti_schur.syrk import SyrkConfig, syrk, syrk_baseline, syrk_input_split, syrk_output_split
from feti_schur.trsm import trsm_baseline

from problems import factored


def naive_lower_gram(y):
    n, m = y.shape
    f = np.zeros((m, m))
    for r in range(m):
        for c in range(r + 1):
            for k in range(n):
                f[r, c] += y[k, r] * y[k, c]
    return f


def solved_y(dim, n):
    p, fb = factored(dim, n)
    staged = prepare_rhs(p, fb)
    y = staged.y.copy()
    trsm_baseline(fb.L, y)
    return y, staged.profile.filled()


def test_baseline_hand():
    f, _ = syrk_baseline(np.array([[1.0, 0.0], [2.0, 3.0]]))
    np.testing.assert_array_equal(f, [[5, 0], [6, 9]])


def test_baseline_zero():
    f, _ = syrk_baseline(np.zeros((4, 3)))
    np.testing.assert_array_equal(f, 0.0)


def test_baseline_matches_naive(rng):
    y = rng.standard_normal((30, 12))
    f, flops = syrk_baseline(y)
    np.testing.assert_allclose(f, naive_lower_gram(y), rtol=1e-14, atol=1e-13)
    assert np.all(np.triu(f, 1) == 0.0)
    assert flops.multiply_adds == 30 * 12 * 13 // 2


@pytest.mark.parametrize("fn", [syrk_input_split, syrk_output_split])
def test_single_block_is_baseline(fn, rng):
    y = stepped_dense(rng, 20, 6, np.zeros(6, dtype=int))
    ref, base = syrk_baseline(y)
    f, flops = fn(y, compute_profile(y), BlockPolicy.fixed_count(1))
    assert flops == base
    assert relative_frobenius(f, ref) < 1e-14


def test_input_split_one_row_blocks_closed_form():
    n = 300
    y = stepped_dense(np.random.default_rng(2), n, n, triangular_pivots(n, n))
    prof = compute_profile(y)
    _, base = syrk_baseline(y)
    f, flops = syrk_input_split(y, prof, BlockPolicy.fixed_size(1))
    # row i touches the leading i + 1 columns: a triangle of (i + 1)(i + 2) / 2 products
    assert flops.multiply_adds == sum((i + 1) * (i + 2) // 2 for i in range(n))
    assert base.multiply_adds == n * n * (n + 1) // 2
    assert base.multiply_adds / flops.multiply_adds == pytest.approx(3 * n / (n + 2))


def test_output_split_block_structure(rng):
    # three column blocks A, B, C with pivots increasing block by block
    y = stepped_dense(rng, 12, 6, np.array([0, 1, 4, 5, 8, 9]))
    f, _ = syrk_output_split(y, compute_profile(y), BlockPolicy.fixed_size(2))
    a, b, c = y[:, 0:2], y[:, 2:4], y[:, 4:6]
    np.testing.assert_allclose(f[4:6, 4:6], np.tril(c.T @ c), rtol=1e-14)
    np.testing.assert_allclose(f[4:6, 2:4], c.T @ b, rtol=1e-14)
    np.testing.assert_allclose(f[2:4, 0:2], b.T @ a, rtol=1e-14)


@pytest.mark.parametrize("dim,n", [(2, 81), (3, 343)])
def test_split_variants_on_generated_y(dim, n):
    y, prof = solved_y(dim, n)
    ref, base = syrk_baseline(y)
    for variant in ("input_split", "output_split"):
        for part in (BlockPolicy.fixed_size(10), BlockPolicy.fixed_count(4)):
            f, flops = syrk(y, prof, SyrkConfig(variant, part))
            assert relative_frobenius(f, ref) < 1e-13
            assert flops.multiply_adds <= base.multiply_adds


def test_profile_mismatch(rng):
    y = np.ones((4, 3))
    bad = compute_profile(np.tril(np.ones((4, 3))))
    with pytest.raises(ConsistencyError):
        syrk_input_split(y, bad, BlockPolicy.fixed_size(2))
    with pytest.raises(ConsistencyError):
        syrk_output_split(y, bad, BlockPolicy.fixed_size(2))
    with pytest.raises(ValueError):
        SyrkConfig("column_split")


@given(st.integers(0, 10**6), st.integers(1, 10))
def test_random_stepped_equivalence_and_psd(seed, block):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 30)), int(rng.integers(1, 20))
    x = stepped_dense(rng, n, m, density=float(rng.uniform(0.2, 1.0)))
    prof = compute_profile(x).filled()
    y = x.copy()
    trsm_baseline(random_lower_factor(rng, n, 0.3), y)
    ref, _ = syrk_baseline(y)
    for variant in ("input_split", "output_split"):
        f, _ = syrk(y, prof, SyrkConfig(variant, BlockPolicy.fixed_size(block)))
        assert relative_frobenius(f, ref) < 1e-13
        full = f + np.tril(f, -1).T
        assert np.array_equal(full, full.T)
        eig = np.linalg.eigvalsh(full)
        assert eig.min() >= -1e-10 * max(1.0, np.abs(eig).max())


def test_ideal_ratio():
    n = 1024
    y = stepped_dense(np.random.default_rng(3), n, n, triangular_pivots(n, n))
    _, base = syrk_baseline(y)
    _, split = syrk_input_split(y, compute_profile(y), BlockPolicy.fixed_size(16), check=False)
    assert base.multiply_adds / split.multiply_adds >= 2.7
