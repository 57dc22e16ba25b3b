"""Linear maps between finite-dimensional C*-algebras and their Choi tests."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._linalg import DEFAULT_TOL, min_eigenvalue, psd_threshold
from .errors import DomainError
from .qspace import AlgebraElement, FiniteQuantumSpace, StateFunctional


@dataclass(frozen=True, eq=False)
class BlockLinearMap:
    """Linear map fixed by the images of the domain's matrix units.

    ``matrix[c, u]`` is the coefficient of codomain unit ``c`` in the image of
    domain unit ``u``.
    """

    dom: FiniteQuantumSpace
    cod: FiniteQuantumSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.cod.algebra_dim, self.dom.algebra_dim):
            raise DomainError(f"map matrix has shape {m.shape}, expected "
                              f"{(self.cod.algebra_dim, self.dom.algebra_dim)}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_images(cls, dom: FiniteQuantumSpace, cod: FiniteQuantumSpace,
                    images) -> "BlockLinearMap":
        """Build from images given flat (one per unit) or nested as ``images[k][i][j]``."""
        flat = []
        if len(images) == dom.algebra_dim and all(isinstance(x, AlgebraElement) for x in images):
            flat = list(images)
        else:
            if len(images) != dom.n_blocks:
                raise DomainError(f"expected images for {dom.n_blocks} blocks, got {len(images)}")
            for k, n in enumerate(dom.blocks):
                rows = images[k]
                if len(rows) != n or any(len(r) != n for r in rows):
                    raise DomainError(f"images of block {k} must form an {n}x{n} array")
                flat.extend(x for r in rows for x in r)
        for x in flat:
            if x.space != cod:
                raise DomainError(f"image lives on {x.space!r}, expected {cod!r}")
        return cls(dom, cod, np.stack([x.coeffs for x in flat], axis=1))

    @classmethod
    def from_function(cls, dom: FiniteQuantumSpace, cod: FiniteQuantumSpace,
                      f: Callable[[AlgebraElement], AlgebraElement]) -> "BlockLinearMap":
        from .qspace import matrix_unit
        return cls.from_images(dom, cod, [f(matrix_unit(dom, k, i, j)) for k, i, j in dom.units])

    def apply(self, x: AlgebraElement) -> AlgebraElement:
        if x.space != self.dom:
            raise DomainError(f"argument lives on {x.space!r}, expected {self.dom!r}")
        return AlgebraElement.from_coeffs(self.cod, self.matrix @ x.coeffs)

    __call__ = apply

    def image(self, k: int, i: int, j: int) -> AlgebraElement:
        return AlgebraElement.from_coeffs(self.cod, self.matrix[:, self.dom.unit_index(k, i, j)])

    def images(self) -> list:
        """Nested ``images[k][i][j]``."""
        return [[[self.image(k, i, j) for j in range(n)] for i in range(n)]
                for k, n in enumerate(self.dom.blocks)]

    def block_images(self) -> list[np.ndarray]:
        """Per codomain block ``c``: array (dom.algebra_dim, n_c, n_c) of image blocks."""
        return self.cod.to_blocks(self.matrix.T)

    def compose(self, inner: "BlockLinearMap") -> "BlockLinearMap":
        """``self o inner``."""
        if inner.cod != self.dom:
            raise DomainError("cannot compose: codomain and domain differ")
        return BlockLinearMap(inner.dom, self.cod, self.matrix @ inner.matrix)


def identity_map(space: FiniteQuantumSpace) -> BlockLinearMap:
    return BlockLinearMap(space, space, np.eye(space.algebra_dim))


def transpose_map(space: FiniteQuantumSpace) -> BlockLinearMap:
    """Blockwise transpose ``e^k_{ij} -> e^k_{ji}``."""
    m = np.zeros((space.algebra_dim, space.algebra_dim))
    m[space.transpose_perm, np.arange(space.algebra_dim)] = 1.0
    return BlockLinearMap(space, space, m)


def state_map(state: StateFunctional, cod: FiniteQuantumSpace) -> BlockLinearMap:
    """``x -> state(x) * 1``."""
    dom = state.space
    values = np.array([state(AlgebraElement.from_coeffs(dom, np.eye(dom.algebra_dim)[u]))
                       for u in range(dom.algebra_dim)])
    return BlockLinearMap(dom, cod, np.outer(cod.unit_vector, values))


def block_permutation_map(space: FiniteQuantumSpace, perm: Sequence[int]) -> BlockLinearMap:
    """Automorphism sending block ``k`` of the argument to block ``perm[k]`` of the result."""
    perm = list(perm)
    if sorted(perm) != list(range(space.n_blocks)):
        raise DomainError(f"{perm} is not a permutation of the blocks")
    if any(space.blocks[k] != space.blocks[p] for k, p in enumerate(perm)):
        raise DomainError("only blocks of equal size can be permuted")
    m = np.zeros((space.algebra_dim, space.algebra_dim))
    for k, p in enumerate(perm):
        src = space.block_slice(k)
        dst = space.block_slice(p)
        m[dst, src] = np.eye(space.blocks[k] ** 2)
    return BlockLinearMap(space, space, m)


def kraus_map(dom: FiniteQuantumSpace, cod: FiniteQuantumSpace, kraus) -> BlockLinearMap:
    """``x -> sum_a K_a x K_a^*`` followed by the block-diagonal pinching of ``cod``.

    Kraus operators are dense ``cod.hilbert_dim x dom.hilbert_dim`` matrices. The
    pinching is itself completely positive, so the composite always is.
    """
    from .qspace import matrix_unit
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    for k in kraus:
        if k.shape != (cod.hilbert_dim, dom.hilbert_dim):
            raise DomainError(f"Kraus operator has shape {k.shape}")
    cols = []
    for k, i, j in dom.units:
        e = matrix_unit(dom, k, i, j).dense()
        cols.append(cod.compress(sum(K @ e @ K.conj().T for K in kraus)))
    return BlockLinearMap(dom, cod, np.stack(cols, axis=1))


def choi_blocks(m: BlockLinearMap, by_codomain_block: bool = False) -> list[np.ndarray]:
    """Choi matrices ``C_k = sum_ij e_ij (x) m(e^k_ij)``, one per domain block.

    The image is embedded block-diagonally on the codomain Hilbert space, so
    ``C_k`` has size ``n_k * cod.hilbert_dim``. With ``by_codomain_block`` the
    block-diagonal pieces are returned separately, ordered ``(k, c)``; their
    spectra together make up the spectrum of ``C_k``.
    """
    out = []
    dense_images = None
    if not by_codomain_block:
        h = m.cod.hilbert_dim
        dense_images = np.zeros((m.dom.algebra_dim, h, h), dtype=complex)
        for c, imgs in enumerate(m.block_images()):
            o, n = m.cod.offsets[c], m.cod.blocks[c]
            dense_images[:, o:o + n, o:o + n] = imgs
    for k, n in enumerate(m.dom.blocks):
        sl = m.dom.block_slice(k)
        pieces = [dense_images[sl]] if dense_images is not None else [b[sl] for b in m.block_images()]
        for imgs in pieces:
            nc = imgs.shape[-1]
            out.append(imgs.reshape(n, n, nc, nc).transpose(0, 2, 1, 3).reshape(n * nc, n * nc))
    return out


@dataclass
class UCPReport:
    ok: bool
    completely_positive: bool
    unital: bool
    min_eigenvalue: float
    unitality_defect: float

    def __bool__(self):
        return self.ok


def unitality_defect(m: BlockLinearMap) -> float:
    return float(np.max(np.abs(m.matrix @ m.dom.unit_vector - m.cod.unit_vector), initial=0.0))


def is_ucp(m: BlockLinearMap, tol: float = DEFAULT_TOL) -> UCPReport:
    """Unital and completely positive, judged by the Choi blocks."""
    worst = np.inf
    cp = True
    for c in choi_blocks(m, by_codomain_block=True):
        ev = min_eigenvalue(c)
        worst = min(worst, ev)
        if ev < psd_threshold(c, tol):
            cp = False
    defect = unitality_defect(m)
    unital = defect <= tol
    return UCPReport(cp and unital, cp, unital, float(worst), defect)


@dataclass
class HomomorphismReport:
    ok: bool
    unitality_defect: float
    adjoint_defect: float
    multiplicativity_defect: float
    worst_pair: tuple | None = field(default=None)

    def __bool__(self):
        return self.ok


def is_star_homomorphism(m: BlockLinearMap, tol: float = DEFAULT_TOL) -> HomomorphismReport:
    """Unital, *-preserving on matrix units, and ``m(e_a) m(e_b) = m(e_a e_b)``."""
    dom = m.dom
    table = dom.product_table
    tperm = dom.transpose_perm
    adj = 0.0
    mult = 0.0
    worst = None
    for imgs in m.block_images():
        if imgs.shape[-1] == 0:
            continue
        adj = max(adj, float(np.max(np.abs(imgs.conj().swapaxes(-1, -2) - imgs[tperm]), initial=0.0)))
        zero = np.zeros_like(imgs[0])
        for a in range(dom.algebra_dim):
            prods = imgs[a] @ imgs
            idx = table[a]
            expected = np.where((idx >= 0)[:, None, None], imgs[np.maximum(idx, 0)], zero)
            err = np.max(np.abs(prods - expected), axis=(1, 2))
            b = int(np.argmax(err))
            if err[b] > mult:
                mult = float(err[b])
                worst = (tuple(int(x) for x in dom.units[a]), tuple(int(x) for x in dom.units[b]))
    unit_def = unitality_defect(m)
    ok = unit_def <= tol and adj <= tol and mult <= tol
    return HomomorphismReport(ok, unit_def, adj, mult, worst)


def is_tracial(state: StateFunctional, tol: float = DEFAULT_TOL) -> bool:
    """Every density block is a multiple of the identity."""
    for rho in state.density.mats:
        n = rho.shape[0]
        if np.max(np.abs(rho - np.trace(rho) / n * np.eye(n))) > tol:
            return False
    return True
