import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcorr import (AlgebraElement, DomainError, FiniteQuantumSpace, StateFunctional,
                   act_on_vector, is_positive, matrix_unit, maximally_entangled_vector, tensor,
                   tensor_space, tensor_unit_index, unit, zero)
from qcorr.qspace import block_trace

blocks_st = st.lists(st.integers(1, 3), min_size=1, max_size=3)


def random_element(space, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(space.algebra_dim) + 1j * rng.standard_normal(space.algebra_dim)
    return AlgebraElement.from_coeffs(space, c)


def test_space_dimensions():
    s = FiniteQuantumSpace((2, 3))
    assert s.algebra_dim == 13
    assert s.hilbert_dim == 5
    assert s.n_blocks == 2
    assert not s.is_classical
    assert FiniteQuantumSpace((1, 1, 1)).is_classical


@pytest.mark.parametrize("blocks", [(), (0,), (2, -1), (1.5,)])
def test_space_rejects_bad_blocks(blocks):
    with pytest.raises(DomainError):
        FiniteQuantumSpace(blocks)


def test_matrix_unit_of_one_point_is_unit():
    s = FiniteQuantumSpace((1,))
    assert matrix_unit(s, 0, 0, 0).allclose(unit(s), 0)


def test_matrix_unit_position():
    s = FiniteQuantumSpace((2, 3))
    e = matrix_unit(s, 1, 0, 2)
    assert np.array_equal(e.mats[0], np.zeros((2, 2)))
    expected = np.zeros((3, 3))
    expected[0, 2] = 1
    assert np.array_equal(e.mats[1], expected)


@pytest.mark.parametrize("args", [(2, 0, 0), (0, 2, 0), (1, 0, 3), (-1, 0, 0)])
def test_matrix_unit_out_of_range(args):
    with pytest.raises(DomainError):
        matrix_unit(FiniteQuantumSpace((2, 3)), *args)


@given(blocks_st)
def test_resolution_of_identity(blocks):
    s = FiniteQuantumSpace(tuple(blocks))
    total = zero(s)
    for k, n in enumerate(blocks):
        for i in range(n):
            total = total + matrix_unit(s, k, i, i)
    assert total.allclose(unit(s), 0)


@given(blocks_st)
def test_matrix_unit_products_exact(blocks):
    s = FiniteQuantumSpace(tuple(blocks))
    units = [matrix_unit(s, *u) for u in s.units]
    for a, (k, i, j) in enumerate(s.units):
        for b, (k2, i2, j2) in enumerate(s.units):
            prod = units[a] @ units[b]
            if k == k2 and j == i2:
                assert prod.allclose(matrix_unit(s, k, i, j2), 0)
            else:
                assert prod.allclose(zero(s), 0)
            assert s.product_table[a, b] == (s.unit_index(k, i, j2) if k == k2 and j == i2 else -1)


@pytest.mark.parametrize("a,b,expected", [((1,), (4,), (4,)), ((2, 3), (1, 1), (2, 2, 3, 3)),
                                          ((2,), (2,), (4,))])
def test_tensor_space_blocks(a, b, expected):
    assert tensor_space(FiniteQuantumSpace(a), FiniteQuantumSpace(b)).blocks == expected


@settings(max_examples=30, deadline=None)
@given(blocks_st, blocks_st, st.integers(0, 2**32))
def test_tensor_unit_index_matches_kronecker(a, b, seed):
    A, B = FiniteQuantumSpace(tuple(a)), FiniteQuantumSpace(tuple(b))
    x, y = random_element(A, seed), random_element(B, seed + 1)
    xy = tensor(x, y)
    idx = tensor_unit_index(A, B)
    assert np.allclose(xy.coeffs[idx], np.outer(x.coeffs, y.coeffs), atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(blocks_st, st.integers(0, 2**32))
def test_adjoint_reverses_products(blocks, seed):
    s = FiniteQuantumSpace(tuple(blocks))
    x, y = random_element(s, seed), random_element(s, seed + 7)
    assert (x @ y).adjoint().allclose(y.adjoint() @ x.adjoint(), 1e-12)


@settings(max_examples=50, deadline=None)
@given(blocks_st, st.integers(0, 2**32))
def test_positivity_of_squares(blocks, seed):
    s = FiniteQuantumSpace(tuple(blocks))
    y = random_element(s, seed)
    assert is_positive(y.adjoint() @ y)
    # a Hermitian element with a clearly negative eigenvalue is rejected
    assert not is_positive(-(y.adjoint() @ y) - 0.1 * unit(s))


@settings(max_examples=50, deadline=None)
@given(blocks_st, st.integers(0, 2**32))
def test_normalized_trace_is_tracial(blocks, seed):
    s = FiniteQuantumSpace(tuple(blocks))
    tau = StateFunctional.normalized_trace(s)
    x, y = random_element(s, seed), random_element(s, seed + 3)
    assert abs(tau(x @ y) - tau(y @ x)) <= 1e-12
    assert abs(tau(unit(s)) - 1) <= 1e-15


def test_normalized_trace_weights_by_dimension():
    s = FiniteQuantumSpace((1, 2))
    tau = StateFunctional.normalized_trace(s)
    assert tau(matrix_unit(s, 0, 0, 0)) == pytest.approx(1 / 3)
    assert tau(matrix_unit(s, 1, 1, 1)) == pytest.approx(1 / 3)
    assert block_trace(unit(s), 1) == 2


def test_state_validation():
    with pytest.raises(DomainError):
        StateFunctional.from_density(np.diag([1.5, -0.5]))
    with pytest.raises(DomainError):
        StateFunctional.from_density(np.diag([0.5, 0.6]))
    w = StateFunctional.from_vector([1, 0])
    s = w.space
    assert w(matrix_unit(s, 0, 0, 0)) == 1
    assert w(matrix_unit(s, 0, 1, 1)) == 0


def test_from_dense_rejects_off_block_entries():
    s = FiniteQuantumSpace((1, 1))
    with pytest.raises(DomainError):
        AlgebraElement.from_dense(s, np.ones((2, 2)))
    x = AlgebraElement.from_dense(s, np.diag([2.0, 3.0]))
    assert x.mats[1][0, 0] == 3


def test_maximally_entangled_two_points():
    phi = maximally_entangled_vector(FiniteQuantumSpace((1, 1)))
    expected = np.zeros(4)
    expected[0] = expected[3] = 1 / np.sqrt(2)
    assert np.allclose(phi.vector, expected, atol=0)


def test_maximally_entangled_single_block():
    phi = maximally_entangled_vector(FiniteQuantumSpace((2,)))
    expected = np.zeros(4)
    expected[0] = expected[3] = 1 / np.sqrt(2)
    assert np.allclose(phi.vector, expected, atol=0)


@given(blocks_st)
def test_maximally_entangled_support_and_norm(blocks):
    P = FiniteQuantumSpace(tuple(blocks))
    phi = maximally_entangled_vector(P)
    assert abs(phi.norm() - 1) <= 1e-14
    h = P.hilbert_dim
    nz = np.flatnonzero(phi.vector)
    for o, m in zip(P.offsets, P.blocks):
        for s in range(m):
            assert phi.vector[(o + s) * h + o + s] == pytest.approx(1 / np.sqrt(len(blocks) * m))
    assert len(nz) == h


@given(st.lists(st.integers(1, 2), min_size=1, max_size=3))
def test_maximally_entangled_matrix_elements(blocks):
    # <phi, (f^l_st (x) f^l'_s't') phi> = delta_ll' delta_ss' delta_tt' / (N m_l)
    P = FiniteQuantumSpace(tuple(blocks))
    phi = maximally_entangled_vector(P).vector
    for (l, s, t) in P.units:
        for (lp, sp, tp) in P.units:
            x = tensor(matrix_unit(P, l, s, t), matrix_unit(P, lp, sp, tp))
            val = np.vdot(phi, act_on_vector(x, phi, P))
            want = (l == lp and s == sp and t == tp) / (len(blocks) * blocks[l])
            assert abs(val - want) <= 1e-14


def test_act_on_vector_examples():
    P = FiniteQuantumSpace((1, 1))
    pp = tensor_space(P, P)
    phi = maximally_entangled_vector(P).vector
    assert np.allclose(act_on_vector(unit(pp), phi, P), phi)
    proj = tensor(matrix_unit(P, 0, 0, 0), matrix_unit(P, 0, 0, 0))
    out = act_on_vector(proj, phi, P)
    assert np.allclose(out, [1 / np.sqrt(2), 0, 0, 0])
    assert np.vdot(phi, act_on_vector(unit(pp), phi, P)) == pytest.approx(1)
    with pytest.raises(DomainError):
        act_on_vector(unit(pp), np.ones(3), P)


def test_elements_are_immutable():
    x = unit(FiniteQuantumSpace((2,)))
    with pytest.raises(ValueError):
        x.mats[0][0, 0] = 5
