import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from feti_schur.assembler import AssemblyConfig, assemble_explicit, factorize_subdomain, oracle_sc
from feti_schur.matrix_core import SparseCsr, csr_to_dense, relative_frobenius
from feti_schur.problem import (
    DecompositionSpec,
    DegenerateElementError,
    element_stiffness_2d,
    element_stiffness_3d,
    generate,
    regularize,
)

from problems import decomposition

coords2 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=6, max_size=6)
coords3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=12, max_size=12)


def mesh_walk_multiplier_count(dim, e, s):
    """Pairs of coincident subdomain nodes, found by walking the global grid."""
    g = s * e
    total = 0
    for node in itertools.product(range(g + 1), repeat=dim):
        owners = 1
        for c in node:
            # an interior interface coordinate belongs to two subdomain slabs
            owners *= 2 if (c % e == 0 and 0 < c < g) else 1
        total += owners - 1
    return total


def unstable_volume(x, dim):
    """|det| of the edge vectors from vertex 0 (proportional to area or volume)."""
    return abs(np.linalg.det((x[1:] - x[0]).T))


# --- generation

def test_single_subdomain_has_no_multipliers():
    dec = generate(DecompositionSpec(dim=2, elements_per_edge=1, subdomains_per_edge=1))
    assert len(dec.subdomains) == 1 and dec.n_multipliers == 0
    p = dec.subdomains[0]
    assert p.n == 4 and p.bt.shape == (4, 0) and p.m == 0


@pytest.mark.parametrize("dim,e,s", [(2, 2, 2), (2, 3, 3), (3, 2, 2), (3, 1, 3)])
def test_multiplier_count_matches_mesh_walk(dim, e, s):
    dec = generate(DecompositionSpec(dim, e, s))
    assert dec.n_multipliers == mesh_walk_multiplier_count(dim, e, s)


def test_3d_smallest_size():
    dec = generate(DecompositionSpec(dim=3, elements_per_edge=3, subdomains_per_edge=1))
    assert dec.subdomains[0].n == 64


def test_for_size():
    assert DecompositionSpec.for_size(3, 2744).elements_per_edge == 13
    with pytest.raises(ValueError):
        DecompositionSpec.for_size(2, 50)


def test_spec_validation():
    with pytest.raises(ValueError):
        DecompositionSpec(dim=4)
    with pytest.raises(ValueError):
        DecompositionSpec(elements_per_edge=0)
    with pytest.raises(ValueError):
        DecompositionSpec(regularization_rho=0.0)


@pytest.mark.parametrize("dim,e,s", [(2, 2, 2), (2, 3, 3), (3, 2, 2)])
def test_gluing_invariants(dim, e, s):
    dec = decomposition(dim, e, s)
    seen = np.zeros(dec.n_multipliers, dtype=int)
    sign_sum = np.zeros(dec.n_multipliers)
    for p in dec.subdomains:
        assert len(set(p.lambda_map.tolist())) == p.m
        assert np.all(p.bt.row_counts() <= 2 ** dim)
        counts = np.bincount(p.bt.col_idx, minlength=p.m)
        assert np.all(counts == 1)
        seen[p.lambda_map] += 1
        np.add.at(sign_sum, p.lambda_map[p.bt.col_idx], p.bt.values)
    assert np.all(seen == 2)
    np.testing.assert_array_equal(sign_sum, 0.0)


@pytest.mark.parametrize("dim,e,s", [(2, 2, 2), (3, 2, 2), (2, 4, 3)])
def test_continuous_field_satisfies_constraints(dim, e, s):
    dec = decomposition(dim, e, s)
    u = np.concatenate([np.sin(dec.node_coords[p.nodes] @ np.arange(1.0, dim + 1))
                        for p in dec.subdomains])
    np.testing.assert_array_equal(dec.global_b().matvec(u), 0.0)


@pytest.mark.parametrize("dim,e", [(2, 3), (3, 2)])
def test_k_reg_spd_and_symmetric(dim, e):
    k = csr_to_dense(decomposition(dim, e).subdomains[0].k_reg)
    np.testing.assert_array_equal(k, k.T)
    np.linalg.cholesky(k)


def test_generation_is_deterministic():
    a = generate(DecompositionSpec(3, 2, 2))
    b = generate(DecompositionSpec(3, 2, 2))
    for pa, pb in zip(a.subdomains, b.subdomains):
        assert pa.k_reg == pb.k_reg and pa.bt == pb.bt
        np.testing.assert_array_equal(pa.lambda_map, pb.lambda_map)


# --- element matrices

def test_unit_right_triangle():
    ke = element_stiffness_2d([[0, 0], [1, 0], [0, 1]])
    np.testing.assert_allclose(ke, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)


@given(coords2)
def test_triangle_row_sums_and_scaling(c):
    x = np.array(c).reshape(3, 2)
    if unstable_volume(x, 2) < 1e-3:
        return
    ke = element_stiffness_2d(x)
    np.testing.assert_allclose(ke.sum(axis=1), 0.0, atol=1e-9 * np.abs(ke).max())
    np.testing.assert_allclose(ke, ke.T)
    np.testing.assert_allclose(element_stiffness_2d(2.0 * x), ke, rtol=1e-9, atol=1e-9 * np.abs(ke).max())
    assert np.linalg.eigvalsh(ke).min() > -1e-9 * np.abs(ke).max()


def test_degenerate_elements():
    with pytest.raises(DegenerateElementError):
        element_stiffness_2d([[0, 0], [1, 1], [2, 2]])
    with pytest.raises(DegenerateElementError):
        element_stiffness_3d([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])


def test_reference_tet_vertex_zero():
    ke = element_stiffness_3d([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert ke[0, 0] == pytest.approx(0.5)


@given(coords3)
def test_tet_matches_basis_function_oracle(c):
    x = np.array(c).reshape(4, 3)
    if unstable_volume(x, 3) < 1e-2:
        return
    ke = element_stiffness_3d(x)
    np.testing.assert_allclose(ke.sum(axis=1), 0.0, atol=1e-9 * np.abs(ke).max())
    # phi_i = a_i + g_i . x with phi_i(x_j) = delta_ij; gradients are constant
    coeffs = np.linalg.inv(np.hstack([np.ones((4, 1)), x]))
    grads = coeffs[1:].T
    volume = ConvexHull(x).volume
    np.testing.assert_allclose(ke, volume * grads @ grads.T, rtol=1e-7, atol=1e-9 * np.abs(ke).max())


# --- regularization

def test_regularize_spd_input_shifts_one_entry():
    k = SparseCsr.from_dense(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    r = regularize(k, 1.0)
    assert r.same_structure(k)
    diff = csr_to_dense(r) - csr_to_dense(k)
    assert diff[0, 0] == pytest.approx(2.0) and np.count_nonzero(diff) == 1


def test_regularize_floating_element_pair():
    dec = generate(DecompositionSpec(dim=2, elements_per_edge=1, subdomains_per_edge=2))
    k = csr_to_dense(dec.subdomains[0].k_reg)
    assert np.linalg.eigvalsh(k).min() > 0


def test_regularize_rejects_nonpositive_rho():
    with pytest.raises(ValueError):
        regularize(SparseCsr.identity(2), 0.0)
    with pytest.raises(ValueError):
        regularize(SparseCsr.identity(2), -1.0)


def test_rho_sweep_changes_operator_but_keeps_oracle_agreement():
    ops = []
    for rho in (1e-3, 1.0, 1e3):
        p = generate(DecompositionSpec(2, 4, 2, rho)).subdomains[0]
        op = assemble_explicit(p, factorize_subdomain(p), AssemblyConfig.for_dim(2))
        assert relative_frobenius(op.f, oracle_sc(p)) < 1e-10
        ops.append(op.f)
    assert relative_frobenius(ops[0], ops[2]) > 1e-3
