import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcorr import (BlockLinearMap, DomainError, FiniteQuantumSpace, POVMFamily,
                   PreconditionError, QuantumFamily, UnsatisfiableError, commutes_second_leg,
                   identity_map, is_star_homomorphism, merge_family, multiplicity_solutions,
                   onepoint_family, opposite_family, pisier_decompose, pullback_family,
                   random_family, random_povm_family, slice_span, split_family, state_map,
                   validate_family, validate_povm, StateFunctional, AlgebraElement)
from qcorr.errors import RankError

from conftest import random_config, random_embedding, solvable


def test_onepoint_family_is_valid():
    for blocks in [(1,), (2,), (2, 1), (1, 1, 3)]:
        F = onepoint_family(blocks)
        assert F.d == sum(blocks)
        rep = validate_family(F)
        assert rep.ok and rep.max_violation == 0


def test_onepoint_generators_are_embedded_units():
    F = onepoint_family((2, 1))
    g = F.gen(0, 0, 1, 0, 0, 0)
    expected = np.zeros((3, 3))
    expected[1, 0] = 1
    assert np.array_equal(g, expected)


def test_zero_generators_with_unital_fixup_fail():
    # only the diagonal units carry the identity share; products then break
    O, P, d = FiniteQuantumSpace((2,)), FiniteQuantumSpace((1,)), 2
    gens = np.zeros((4, 1, d, d), dtype=complex)
    gens[0, 0] = gens[3, 0] = np.eye(d) / 2
    rep = validate_family(QuantumFamily(P, O, d, gens))
    assert rep.unitality == 0 and rep.adjoint == 0
    assert not rep.ok
    # U(e_01) U(e_10) = 0 on the diagonal while U(e_00) = I/2
    assert rep.diagonal_product == pytest.approx(0.5)


def test_diagonal_relation_alone_does_not_certify_homomorphism():
    # d = 1, O = two points, P = M_2: Phi(e_1) = A, Phi(e_2) = I - A.
    # The (s, s) entries of A^2, (I-A)^2 and A(I-A) match, the off-diagonal ones do not.
    A = np.array([[0.2, 0.4], [0.4, 0.2]])
    gens = np.stack([A.reshape(4, 1, 1), (np.eye(2) - A).reshape(4, 1, 1)])
    F = QuantumFamily(FiniteQuantumSpace((2,)), FiniteQuantumSpace((1, 1)), 1, gens)
    rep = validate_family(F)
    assert rep.adjoint <= 1e-15 and rep.unitality <= 1e-15
    assert rep.diagonal_product <= 1e-15
    assert rep.product == pytest.approx(0.24)
    assert not rep.ok
    assert not is_star_homomorphism(F.as_map()).ok


def test_broken_adjoint_names_index():
    F = onepoint_family((2,))
    gens = np.array(F.gens)
    gens[1, 0, 0, 1] = 2.0  # U for e_01 no longer adjoint to U for e_10
    rep = validate_family(F.with_gens(gens))
    assert not rep.ok
    assert rep.adjoint == pytest.approx(1.0)
    assert rep.worst["adjoint"][0] in [(0, 0, 1), (0, 1, 0)]


def test_shape_mismatch():
    with pytest.raises(DomainError):
        QuantumFamily(FiniteQuantumSpace((1,)), FiniteQuantumSpace((2,)), 2, np.zeros((4, 1, 3, 3)))
    with pytest.raises(DomainError):
        QuantumFamily(FiniteQuantumSpace((1,)), FiniteQuantumSpace((2,)), 0, np.zeros((4, 1, 0, 0)))


def test_multiplicity_solutions():
    assert multiplicity_solutions([2], 3) == []
    assert multiplicity_solutions([1, 2], 4) == [(0, 2), (2, 1), (4, 0)]
    assert multiplicity_solutions([3, 2], 7) == [(1, 2)]


def test_random_family_classical_points():
    F = random_family([1, 1], [1, 1], 1, seed=0)
    vals = F.gens.reshape(2, 2).real
    # each question picks exactly one answer
    assert set(vals.ravel()) <= {0.0, 1.0} or np.allclose(vals, np.round(vals))
    assert np.allclose(vals.sum(axis=0), 1)


def test_random_family_unsatisfiable():
    with pytest.raises(UnsatisfiableError) as exc:
        random_family([1], [2], 3, seed=0)
    msg = str(exc.value)
    assert "l=0" in msg and "= 3" in msg


@pytest.mark.parametrize("d", [0, -2])
def test_random_family_bad_d(d):
    with pytest.raises(DomainError):
        random_family([1], [1], d, seed=0)


def test_random_family_m2():
    rep = validate_family(random_family([2], [2], 2, seed=0))
    assert rep.max_violation <= 1e-12


def test_random_family_seed_reproducible():
    a = random_family([2, 1], [1, 2], 3, seed=99)
    b = random_family([2, 1], [1, 2], 3, seed=99)
    assert a.gens.tobytes() == b.gens.tobytes()


def test_generator_relations_many_configs():
    rng = np.random.default_rng(0)
    for seed in range(100):
        P, O, d = random_config(rng)
        F = random_family(P, O, d, seed)
        rep = validate_family(F, 1e-10)
        assert rep.ok, (P, O, d, rep)
        assert rep.trace_aggregate <= 1e-9


def test_validate_agrees_with_homomorphism_check():
    rng = np.random.default_rng(1)
    for seed in range(60):
        P, O, d = random_config(rng, max_blocks=2, max_d=4)
        F = random_family(P, O, d, seed) if seed % 2 else random_povm_family(P, O, d, seed)
        rep = validate_family(F, 1e-9, cross_check=True)
        assert rep.ok == is_star_homomorphism(F.as_map(), 1e-9).ok


def test_povm_family_is_ucp_not_homomorphism():
    G = random_povm_family([2], [2], 2, seed=3)
    assert isinstance(G, POVMFamily)
    assert validate_povm(G).ok
    assert not validate_family(G).ok


def test_validate_povm_rejects_non_positive():
    F = onepoint_family((2,))
    gens = np.array(F.gens)
    gens[0, 0] = np.diag([2.0, 0.0])
    gens[3, 0] = np.diag([-1.0, 1.0])
    assert not validate_povm(F.with_gens(gens)).ok


def test_from_map_inverts_as_map():
    F = random_family([2, 1], [1, 2], 2, seed=4)
    G = QuantumFamily.from_map(F.P, F.d, F.as_map())
    assert np.array_equal(F.gens, G.gens)


def test_pullback_by_identities():
    F = random_family([2], [1, 2], 3, seed=1)
    G = pullback_family(identity_map(F.P), identity_map(F.O), F)
    assert np.max(np.abs(G.gens - F.gens)) <= 1e-12


def test_pullback_block_projection():
    # pi: C(O1 = two points) -> C(O2 = one point), x -> x(1) at the unit
    F = random_family([1], [1], 2, seed=0)
    O1 = FiniteQuantumSpace((1, 1))
    pi = BlockLinearMap(F.O, O1, np.array([[1.0], [1.0]])).__class__(
        O1, F.O, np.array([[1.0, 0.0]]))
    G = pullback_family(identity_map(F.P), pi, F)
    assert validate_family(G).ok
    assert np.allclose(G.gens[0, 0], np.eye(2)) and np.allclose(G.gens[1, 0], 0)


def test_pullback_rejects_non_homomorphism():
    F = random_family([2], [2], 2, seed=0)
    tau = StateFunctional.normalized_trace(F.O)
    bad = state_map(tau, F.O)
    with pytest.raises(PreconditionError) as exc:
        pullback_family(identity_map(F.P), bad, F)
    assert exc.value.residual > 0


def test_pullback_functoriality():
    rng = np.random.default_rng(2)
    for seed in range(10):
        F = random_family([2], [2], 2, seed)
        # homomorphisms between the indexing spaces from random families with d = 1 blocks
        rho2 = random_family([2], [2], 1, rng).as_map()
        rho1 = random_family([2], [2], 1, rng).as_map()
        pi1 = random_family([2], [2], 1, rng).as_map()
        pi2 = random_family([2], [2], 1, rng).as_map()
        from qcorr.qspace import FiniteQuantumSpace as S
        # view maps C(O) -> C(P) (x) M_1 as maps between the block spaces
        r1, r2, p1, p2 = (BlockLinearMap(S((2,)), S((2,)), m.matrix) for m in (rho1, rho2, pi1, pi2))
        twice = pullback_family(r1, p1, pullback_family(r2, p2, F))
        once = pullback_family(r1.compose(r2), p2.compose(p1), F)
        assert np.max(np.abs(twice.gens - once.gens)) <= 1e-12
        assert validate_family(twice).ok


def test_split_merge_round_trip():
    F1 = onepoint_family((2,))
    F2 = onepoint_family((2,))
    M = merge_family(F1, F2)
    assert M.P.blocks == (1, 1)
    assert validate_family(M).ok
    a, b = split_family(M, 1)
    assert a.gens.tobytes() == F1.gens.tobytes() and b.gens.tobytes() == F2.gens.tobytes()


def test_merge_random_families_valid():
    F1 = random_family([2, 1], [1, 2], 2, seed=5)
    F2 = random_family([1], [1, 2], 2, seed=6)
    M = merge_family(F1, F2)
    assert validate_family(M, 1e-10).ok
    assert split_family(M, 2)[1].gens.tobytes() == F2.gens.tobytes()


def test_merge_mismatch():
    with pytest.raises(DomainError):
        merge_family(onepoint_family((2,)), onepoint_family((1, 1)))
    with pytest.raises(DomainError):
        merge_family(random_family([1], [1], 1, seed=0), random_family([1], [1], 2, seed=0))
    with pytest.raises(DomainError):
        split_family(onepoint_family((2,)), 1)


def test_opposite_family():
    F = random_family([1, 1], [1, 1], 1, seed=2)
    assert np.array_equal(opposite_family(F).gens, F.gens)
    G = random_family([2], [2], 2, seed=3)
    assert validate_family(opposite_family(G), 1e-10).ok
    assert opposite_family(opposite_family(G)).gens.tobytes() == G.gens.tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32))
def test_opposite_is_valid_involution(seed):
    rng = np.random.default_rng(seed)
    P, O, d = random_config(rng, max_d=4)
    F = random_family(P, O, d, rng)
    op = opposite_family(F)
    assert validate_family(op, 1e-10).ok
    assert opposite_family(op).gens.tobytes() == F.gens.tobytes()


def test_commutation_examples():
    F = random_family([2], [2], 2, seed=0)
    scalar = QuantumFamily(F.P, F.O, 2, np.kron(np.ones((1, 1)), np.eye(2))[None, None]
                           * random_family([2], [2], 1, seed=1).gens)
    assert commutes_second_leg(F, scalar).ok
    rep = commutes_second_leg(F, F)
    assert not rep.ok and rep.max_commutator > 1e-3 and rep.witness is not None


def test_commutation_bound_path_agrees():
    from qcorr import gns_realization_from_trace
    F = random_family([1, 1], [1, 2], 3, seed=0)
    R = gns_realization_from_trace(F)
    exact = commutes_second_leg(R.phi1, R.phi2, budget=np.inf)
    bound = commutes_second_leg(R.phi1, R.phi2, budget=0)
    assert exact.ok and bound.ok and not bound.exact
    G = random_family([2], [2], 2, seed=0)
    noisy = commutes_second_leg(G, G, budget=0)
    assert not noisy.ok and noisy.exact
    from qcorr.qfamily import _span_commutator_bound
    g = G.gens.reshape(-1, 2, 2)
    assert _span_commutator_bound(g, g) >= noisy.max_commutator


def test_slice_span_examples():
    assert slice_span(onepoint_family((2,))).dim == 4
    assert slice_span(random_family([1, 1], [1, 1], 1, seed=0)).dim == 1
    F = random_family([2], [1, 2], 3, seed=7)
    span = slice_span(F)
    assert span.adjoint_residual <= 1e-10 and span.unit_residual <= 1e-10
    basis = span.basis.reshape(span.dim, -1)
    assert np.allclose(basis @ basis.conj().T, np.eye(span.dim), atol=1e-12)
    from qcorr._linalg import project_residual
    adj = F.gens.conj().swapaxes(-1, -2).reshape(-1, F.d ** 2)
    assert project_residual(basis, adj).max() <= 1e-10


def test_pisier_identity_block():
    dec = pisier_decompose(identity_map(FiniteQuantumSpace((3,))))
    assert dec.dim == 1


def test_pisier_ampliation():
    for m in (1, 2, 3):
        rng = np.random.default_rng(m)
        dec = pisier_decompose(random_embedding(2, [m], rng))
        assert dec.dim == m * m


def test_pisier_m2_into_4_2():
    rng = np.random.default_rng(0)
    dec = pisier_decompose(random_embedding(2, [2, 1], rng))
    assert dec.C.blocks == (4, 2)
    assert dec.dim == 5 and dec.block_dims == (4, 1)
    assert dec.multiplicativity_residual <= 1e-10


def test_pisier_decompose_compose_round_trip():
    rng = np.random.default_rng(1)
    dec = pisier_decompose(random_embedding(3, [1, 2], rng))
    c = AlgebraElement.from_coeffs(dec.C, rng.standard_normal(dec.C.algebra_dim)
                                   + 1j * rng.standard_normal(dec.C.algebra_dim))
    parts = dec.decompose(c)
    assert dec.compose(parts).allclose(c, 1e-12)
    # every c_ij lies in D
    for row in parts:
        for p in row:
            back = dec.coordinates(p) @ dec.basis
            assert np.allclose(back, p.coeffs, atol=1e-12)


def test_pisier_rejects_non_homomorphism():
    tau = StateFunctional.normalized_trace(FiniteQuantumSpace((2,)))
    with pytest.raises(PreconditionError):
        pisier_decompose(state_map(tau, FiniteQuantumSpace((2,))))


def test_pisier_loose_rank_tolerance_reports_rank():
    rng = np.random.default_rng(2)
    with pytest.raises(RankError):
        pisier_decompose(random_embedding(2, [2], rng), rtol=2.0)
