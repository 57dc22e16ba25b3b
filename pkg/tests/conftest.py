import numpy as np
import pytest

from qcorr import (FiniteQuantumSpace, QuantumFamily, multiplicity_solutions, random_family,
                   random_povm_family, product_realization)
from qcorr._linalg import haar_unitary
from qcorr.cpmap import BlockLinearMap
from qcorr.qfamily import standard_embedding


def solvable(P, O, d):
    return all(multiplicity_solutions(O, m * d) for m in P)


def random_config(rng, max_blocks=3, max_size=3, max_d=8):
    """Random (P, O, d) for which a homomorphism family exists."""
    while True:
        P = [int(x) for x in rng.integers(1, max_size + 1, size=rng.integers(1, max_blocks + 1))]
        O = [int(x) for x in rng.integers(1, max_size + 1, size=rng.integers(1, max_blocks + 1))]
        d = int(rng.integers(1, max_d + 1))
        if solvable(P, O, d):
            return P, O, d


def random_state_vector(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def random_density(rng, n, rank=None):
    rank = n if rank is None else rank
    a = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_realization(seed, max_d=3):
    """Product realization of two independent families with a random (entangled) state."""
    rng = np.random.default_rng(seed)
    while True:
        P = [int(x) for x in rng.integers(1, 3, size=rng.integers(1, 3))]
        O = [int(x) for x in rng.integers(1, 3, size=rng.integers(1, 3))]
        d1, d2 = (int(x) for x in rng.integers(1, max_d + 1, size=2))
        if solvable(P, O, d1) and solvable(P, O, d2):
            break
    kind = seed % 4
    F1 = random_family(P, O, d1, rng) if kind != 1 else random_povm_family(P, O, d1, rng)
    F2 = random_family(P, O, d2, rng) if kind != 2 else random_povm_family(P, O, d2, rng)
    d = d1 * d2
    if kind == 3:
        return product_realization(F1, F2, density=random_density(rng, d))
    return product_realization(F1, F2, xi=random_state_vector(rng, d))


def random_embedding(n, mults, rng):
    """Unital embedding M_n -> +_c M_{n c_c}, each block conjugated by a Haar unitary."""
    dom = FiniteQuantumSpace((n,))
    cod = FiniteQuantumSpace(tuple(n * c for c in mults))
    blocks = []
    for c in mults:
        e = standard_embedding(dom, (c,))
        v = haar_unitary(n * c, rng)
        blocks.append(v @ e @ v.conj().T)
    return BlockLinearMap(dom, cod, cod.from_blocks(blocks).T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
