"""Quantum families of maps given by their generator matrices.

A family over ``(P, O, d)`` is a map ``Phi: C(O) -> C(P) (x) M_d`` with

    Phi(e^k_ij) = sum_{l,s,t} f^l_st (x) U^{st}_{ij}.

The generators are stored as one array ``gens`` of shape
``(O.algebra_dim, P.algebra_dim, d, d)``: ``gens[u, v]`` is ``U^{st}_{ij}`` for
the O-unit ``u = (k, i, j)`` and the P-unit ``v = (l, s, t)``. Read with the
unit-index conventions of :mod:`qcorr.qspace` this is exactly the nested order
``k, l, i, j, s, t`` used by the file format.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from ._linalg import (DEFAULT_TOL, RANK_RTOL, haar_unitary, orthonormal_rows,
                      project_residual)
from .cpmap import BlockLinearMap, UCPReport, is_star_homomorphism, is_ucp
from .errors import (DomainError, InternalConsistencyError, PreconditionError,
                     RankError, UnsatisfiableError)
from .qspace import AlgebraElement, FiniteQuantumSpace, _as_space, tensor_space


def unit_label(space: FiniteQuantumSpace, u: int) -> tuple[int, int, int]:
    k, i, j = space.units[u]
    return int(k), int(i), int(j)


@dataclass(frozen=True, eq=False)
class QuantumFamily:
    P: FiniteQuantumSpace
    O: FiniteQuantumSpace
    d: int
    gens: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", _as_space(self.P))
        object.__setattr__(self, "O", _as_space(self.O))
        if isinstance(self.d, bool) or not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        g = np.array(self.gens, dtype=complex)
        want = (self.O.algebra_dim, self.P.algebra_dim, self.d, self.d)
        if g.shape != want:
            raise DomainError(f"gens has shape {g.shape}, expected {want}")
        g.flags.writeable = False
        object.__setattr__(self, "gens", g)

    def gen(self, k: int, l: int, i: int, j: int, s: int, t: int) -> np.ndarray:
        """The generator ``U^{st}_{ij}`` with O-block ``k`` and P-block ``l``."""
        return self.gens[self.O.unit_index(k, i, j), self.P.unit_index(l, s, t)]

    def block_images(self, l: int) -> np.ndarray:
        """``Phi(e_u)`` restricted to P-block ``l`` as (O.algebra_dim, m_l d, m_l d) matrices."""
        m, d = self.P.blocks[l], self.d
        g = self.gens[:, self.P.block_slice(l)].reshape(-1, m, m, d, d)
        return g.transpose(0, 1, 3, 2, 4).reshape(-1, m * d, m * d)

    @property
    def target(self) -> FiniteQuantumSpace:
        """``C(P) (x) M_d`` as a finite quantum space."""
        return tensor_space(self.P, FiniteQuantumSpace((self.d,)))

    def as_map(self) -> BlockLinearMap:
        imgs = [self.block_images(l) for l in range(self.P.n_blocks)]
        return BlockLinearMap(self.O, self.target, self.target.from_blocks(imgs).T)

    @classmethod
    def from_map(cls, P, d: int, m: BlockLinearMap) -> "QuantumFamily":
        """Read generators off a map ``C(O) -> C(P) (x) M_d``."""
        P = _as_space(P)
        if m.cod != tensor_space(P, FiniteQuantumSpace((d,))):
            raise DomainError(f"map codomain {m.cod!r} is not C(P) (x) M_{d}")
        parts = []
        for imgs, mb in zip(m.block_images(), P.blocks):
            g = imgs.reshape(-1, mb, d, mb, d).transpose(0, 1, 3, 2, 4)
            parts.append(g.reshape(-1, mb * mb, d, d))
        return cls(P, m.dom, d, np.concatenate(parts, axis=1))

    def with_gens(self, gens: np.ndarray) -> "QuantumFamily":
        return type(self)(self.P, self.O, self.d, gens)


class POVMFamily(QuantumFamily):
    """Family whose induced map is only required to be unital completely positive."""


@dataclass
class FamilyReport:
    ok: bool
    adjoint: float
    product: float
    diagonal_product: float
    unitality: float
    trace_aggregate: float
    worst: dict = field(default_factory=dict)
    tol: float = DEFAULT_TOL

    def __bool__(self):
        return self.ok

    @property
    def max_violation(self) -> float:
        return max(self.adjoint, self.product, self.diagonal_product, self.unitality,
                   self.trace_aggregate)


def _adjoint_residual(F: QuantumFamily) -> tuple[float, tuple | None]:
    tO, tP = F.O.transpose_perm, F.P.transpose_perm
    err = np.abs(F.gens.conj().swapaxes(-1, -2) - F.gens[tO][:, tP]).max(axis=(-1, -2), initial=0.0)
    if err.size == 0:
        return 0.0, None
    u, v = np.unravel_index(int(np.argmax(err)), err.shape)
    return float(err[u, v]), (unit_label(F.O, u), unit_label(F.P, v))


def _unitality_residual(F: QuantumFamily) -> tuple[float, tuple | None]:
    total = np.tensordot(F.O.unit_vector, F.gens, axes=(0, 0))
    expected = F.P.unit_vector[:, None, None] * np.eye(F.d)
    err = np.abs(total - expected).max(axis=(-1, -2))
    v = int(np.argmax(err))
    return float(err[v]), unit_label(F.P, v)


def validate_family(F: QuantumFamily, tol: float = DEFAULT_TOL,
                    cross_check: bool = False) -> FamilyReport:
    """Check the relations making ``Phi`` a unital *-homomorphism.

    ``diagonal_product`` is the relation ``sum_t U^{st}_{ij} U^{ts}_{j'i'} =
    delta U^{ss}_{ii'}`` for each fixed ``s``. Together with adjoint symmetry and
    unitality it does not force multiplicativity (off-diagonal ``(s, t)`` blocks
    of a product are unconstrained), so ``product`` checks every block of
    ``Phi(e_a) Phi(e_b) = Phi(e_a e_b)`` and the verdict uses both.
    """
    O, d = F.O, F.d
    worst: dict = {}
    adj, worst["adjoint"] = _adjoint_residual(F)
    unital, worst["unitality"] = _unitality_residual(F)

    table = O.product_table
    tO = O.transpose_perm
    w = O.unit_weights
    prod = diag = agg = 0.0
    for l, m in enumerate(F.P.blocks):
        imgs = F.block_images(l)
        zero = np.zeros_like(imgs[0])
        for a in range(O.algebra_dim):
            idx = table[a]
            expected = np.where((idx >= 0)[:, None, None], imgs[np.maximum(idx, 0)], zero)
            err = np.abs(imgs[a] @ imgs - expected).reshape(-1, m, d, m, d)
            full = err.max(axis=(1, 2, 3, 4))
            b = int(np.argmax(full))
            if full[b] > prod:
                prod = float(full[b])
                worst["product"] = (unit_label(O, a), unit_label(O, b), l)
            on_diag = err[:, np.arange(m), :, np.arange(m), :].max(axis=(2, 3))  # (m, DO)
            s, b = np.unravel_index(int(np.argmax(on_diag)), on_diag.shape)
            if on_diag[s, b] > diag:
                diag = float(on_diag[s, b])
                worst["diagonal_product"] = (unit_label(O, a), unit_label(O, b), l, int(s))
        g = F.gens[:, F.P.block_slice(l)].reshape(-1, m, m, d, d)
        total = np.einsum("u,ustpq,utsqr->pr", w, g, g[tO])
        e = float(np.max(np.abs(total - m * np.eye(d))))
        if e > agg:
            agg = e
            worst["trace_aggregate"] = l

    ok = max(adj, prod, diag, unital, agg) <= tol
    report = FamilyReport(ok, adj, prod, diag, unital, agg, worst, tol)
    if cross_check:
        hom = is_star_homomorphism(F.as_map(), tol)
        if hom.ok != report.ok:
            raise InternalConsistencyError(
                f"generator check says {report.ok}, homomorphism check says {hom.ok}")
    return report


@dataclass
class POVMReport:
    ok: bool
    adjoint: float
    min_eigenvalue: float
    unitality: float
    worst: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def validate_povm(F: QuantumFamily, tol: float = DEFAULT_TOL) -> POVMReport:
    """Unital complete positivity of the induced map, plus adjoint symmetry of the generators."""
    adj, where = _adjoint_residual(F)
    ucp: UCPReport = is_ucp(F.as_map(), tol)
    _, unit_where = _unitality_residual(F)
    ok = ucp.ok and adj <= tol
    return POVMReport(ok, adj, ucp.min_eigenvalue, ucp.unitality_defect,
                      {"adjoint": where, "unitality": unit_where})


def multiplicity_solutions(sizes: Sequence[int], target: int,
                           limit: int = 100_000) -> list[tuple[int, ...]]:
    """All non-negative ``c`` with ``sum_k c_k sizes[k] = target``, in lexicographic order."""
    sizes = list(sizes)
    out: list[tuple[int, ...]] = []

    def rec(k: int, left: int, acc: list) -> Iterator:
        if len(out) >= limit:
            return
        if k == len(sizes) - 1:
            if left % sizes[k] == 0:
                out.append(tuple(acc + [left // sizes[k]]))
            return
        for c in range(left // sizes[k] + 1):
            rec(k + 1, left - c * sizes[k], acc + [c])

    if target >= 0 and sizes:
        rec(0, target, [])
    return out


def standard_embedding(O: FiniteQuantumSpace, mult: Sequence[int]) -> np.ndarray:
    """Images of the O matrix units under ``x -> +_k x_k (x) I_{c_k}``, shape (D_O, h, h)."""
    h = sum(c * n for c, n in zip(mult, O.blocks))
    out = np.zeros((O.algebra_dim, h, h), dtype=complex)
    off = 0
    for k, (n, c) in enumerate(zip(O.blocks, mult)):
        eye = np.eye(c)
        for i in range(n):
            for j in range(n):
                e = np.zeros((n, n))
                e[i, j] = 1.0
                out[O.unit_index(k, i, j), off:off + n * c, off:off + n * c] = np.kron(e, eye)
        off += n * c
    return out


def _gens_from_images(imgs: np.ndarray, m: int, d: int) -> np.ndarray:
    """Inverse of :meth:`QuantumFamily.block_images` for one P-block."""
    g = imgs.reshape(-1, m, d, m, d).transpose(0, 1, 3, 2, 4)
    return g.reshape(-1, m * m, d, d)


def random_family(P, O, d: int, seed=None) -> QuantumFamily:
    """Random unital *-homomorphism ``C(O) -> C(P) (x) M_d``.

    Each P-block ``l`` gets a seeded multiplicity vector solving
    ``sum_k c_k n_k = m_l d``, the matching standard embedding, and a Haar
    unitary conjugation.
    """
    P, O = _as_space(P), _as_space(O)
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d <= 0:
        raise DomainError(f"d must be a positive integer, got {d!r}")
    d = int(d)
    rng = np.random.default_rng(seed)
    parts = []
    for l, m in enumerate(P.blocks):
        target = m * d
        sols = multiplicity_solutions(O.blocks, target)
        if not sols:
            terms = " + ".join(f"c_{k}*{n}" for k, n in enumerate(O.blocks))
            raise UnsatisfiableError(
                f"no multiplicities for P-block l={l}: {terms} = {m}*{d} = {target} "
                f"has no non-negative integer solution")
        mult = sols[int(rng.integers(len(sols)))]
        imgs = standard_embedding(O, mult)
        v = haar_unitary(target, rng)
        imgs = v @ imgs @ v.conj().T
        parts.append(_gens_from_images(imgs, m, d))
    return QuantumFamily(P, O, d, np.concatenate(parts, axis=1))


def random_povm_family(P, O, d: int, seed=None) -> POVMFamily:
    """Compression ``V^* U V`` of a larger random homomorphism family by a random isometry.

    The result is unital completely positive and, for ``d`` below the dilation
    size, usually not multiplicative.
    """
    P, O = _as_space(P), _as_space(O)
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d <= 0:
        raise DomainError(f"d must be a positive integer, got {d!r}")
    rng = np.random.default_rng(seed)
    big_d = 2 * int(d) * O.blocks[0]
    big = random_family(P, O, big_d, rng)
    v = haar_unitary(big_d, rng)[:, :d]
    gens = v.conj().T @ big.gens @ v
    return POVMFamily(P, O, int(d), gens)


def onepoint_family(O) -> QuantumFamily:
    """``x -> 1 (x) x`` over a one-point P, with ``d = hilbert_dim(O)``."""
    O = _as_space(O)
    P = FiniteQuantumSpace((1,))
    d = O.hilbert_dim
    gens = np.zeros((O.algebra_dim, 1, d, d), dtype=complex)
    for u, (k, i, j) in enumerate(O.units):
        o = O.offsets[k]
        gens[u, 0, o + i, o + j] = 1.0
    return QuantumFamily(P, O, d, gens)


def pullback_family(rho: BlockLinearMap, pi: BlockLinearMap, F: QuantumFamily,
                    tol: float = DEFAULT_TOL) -> QuantumFamily:
    """The family ``(rho (x) id) o Phi o pi`` over ``(rho.cod, pi.dom)``.

    ``rho`` maps ``C(P_2) -> C(P_1)`` and ``pi`` maps ``C(O_1) -> C(O_2)``.
    """
    if rho.dom != F.P:
        raise DomainError(f"rho starts at {rho.dom!r}, the family lives over P={F.P!r}")
    if pi.cod != F.O:
        raise DomainError(f"pi ends at {pi.cod!r}, the family lives over O={F.O!r}")
    for name, m in (("rho", rho), ("pi", pi)):
        rep = is_star_homomorphism(m, tol)
        if not rep.ok:
            worst = max(rep.unitality_defect, rep.adjoint_defect, rep.multiplicativity_defect)
            raise PreconditionError(f"{name} is not a unital *-homomorphism "
                                    f"(defect {worst:.3g})", residual=worst,
                                    witness=rep.worst_pair)
    gens = np.einsum("bu,va,bapq->uvpq", pi.matrix, rho.matrix, F.gens)
    return type(F)(rho.cod, pi.dom, F.d, gens)


def split_family(F: QuantumFamily, at: int) -> tuple[QuantumFamily, QuantumFamily]:
    """Restrict to the first ``at`` P-blocks and to the rest."""
    n = F.P.n_blocks
    if not 1 <= at < n:
        raise DomainError(f"split point {at} must lie strictly between 0 and {n}")
    P1 = FiniteQuantumSpace(F.P.blocks[:at])
    P2 = FiniteQuantumSpace(F.P.blocks[at:])
    cut = P1.algebra_dim
    return (type(F)(P1, F.O, F.d, F.gens[:, :cut]),
            type(F)(P2, F.O, F.d, F.gens[:, cut:]))


def merge_family(F1: QuantumFamily, F2: QuantumFamily) -> QuantumFamily:
    """Family over the disjoint union ``P_1 + P_2`` (block lists concatenated)."""
    if F1.O != F2.O:
        raise DomainError(f"families act on different O: {F1.O!r} vs {F2.O!r}")
    if F1.d != F2.d:
        raise DomainError(f"families have different d: {F1.d} vs {F2.d}")
    cls = POVMFamily if isinstance(F1, POVMFamily) or isinstance(F2, POVMFamily) else QuantumFamily
    P = FiniteQuantumSpace(F1.P.blocks + F2.P.blocks)
    return cls(P, F1.O, F1.d, np.concatenate([F1.gens, F2.gens], axis=1))


def opposite_family(F: QuantumFamily) -> QuantumFamily:
    """Generators ``(U^{ts}_{ji})^T``; the family on the opposite algebras."""
    gens = F.gens[F.O.transpose_perm][:, F.P.transpose_perm].swapaxes(-1, -2)
    return F.with_gens(gens)


@dataclass
class CommutationReport:
    """``max_commutator`` is the exact largest entry, or an upper bound when ``exact`` is false."""

    ok: bool
    max_commutator: float
    witness: tuple | None = None
    exact: bool = True

    def __bool__(self):
        return self.ok


def _span_commutator_bound(a: np.ndarray, b: np.ndarray) -> float:
    """Upper bound on ``max |[x, y]|`` over the rows of two generator stacks.

    Writing ``x = sum_i alpha_i A_i + r_x`` in an orthonormal basis of the
    span, Cauchy-Schwarz gives ``|[x, y]|_F <= |x| |y| |C|_F`` with
    ``C_ij = |[A_i, B_j]|_F``, plus the truncation terms ``2 |r_x| |y|`` etc.
    """
    d = a.shape[-1]
    fa, fb = a.reshape(-1, d * d), b.reshape(-1, d * d)
    na, nb = np.linalg.norm(fa, axis=1).max(), np.linalg.norm(fb, axis=1).max()
    if na == 0 or nb == 0:
        return 0.0
    ba = orthonormal_rows(fa / na)
    bb = orthonormal_rows(fb / nb)
    ea = float(np.max(project_residual(ba, fa), initial=0.0))
    eb = float(np.max(project_residual(bb, fb), initial=0.0))
    A, B = ba.reshape(-1, d, d), bb.reshape(-1, d, d)
    c2 = 0.0
    for x in A:
        c2 += float(np.sum(np.abs(x @ B - B @ x) ** 2))
    return na * nb * np.sqrt(c2) + 2 * ea * nb + 2 * eb * na + 2 * ea * eb


def commutes_second_leg(F1: QuantumFamily, F2: QuantumFamily, tol: float = DEFAULT_TOL,
                        budget: float = 2e8) -> CommutationReport:
    """Largest entry of ``[U^{st}_{ij}, W^{s't'}_{i'j'}]`` over all generator pairs.

    When the pairwise work exceeds ``budget`` flops, a bound through span bases is
    tried first; a pass on the bound is conclusive, otherwise the exact pass runs.
    """
    if F1.O != F2.O or F1.d != F2.d:
        raise DomainError("families must share O and d")
    d = F1.d
    a = F1.gens.reshape(-1, d, d)
    b = F2.gens.reshape(-1, d, d)
    if a.shape[0] * b.shape[0] * d ** 3 > budget:
        bound = _span_commutator_bound(a, b)
        if bound <= tol:
            return CommutationReport(True, bound, None, exact=False)
    worst, where = 0.0, None
    for x in range(a.shape[0]):
        err = np.abs(a[x] @ b - b @ a[x]).max(axis=(1, 2))
        y = int(np.argmax(err))
        if err[y] > worst:
            worst, where = float(err[y]), (x, y)
    witness = None
    if where is not None:
        u1, v1 = np.unravel_index(where[0], F1.gens.shape[:2])
        u2, v2 = np.unravel_index(where[1], F2.gens.shape[:2])
        witness = ((unit_label(F1.O, u1), unit_label(F1.P, v1)),
                   (unit_label(F2.O, u2), unit_label(F2.P, v2)))
    return CommutationReport(worst <= tol, worst, witness)


@dataclass
class SliceSpan:
    basis: np.ndarray
    adjoint_residual: float
    unit_residual: float

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])


def slice_span(F: QuantumFamily, rtol: float = RANK_RTOL) -> SliceSpan:
    """Hilbert-Schmidt orthonormal basis of ``span{U^{st}_{ij}} + C I``."""
    d = F.d
    vecs = np.concatenate([F.gens.reshape(-1, d * d), np.eye(d).reshape(1, -1)])
    # one global scale: normalizing rows one by one would blow rounding residue up
    basis = orthonormal_rows(vecs / np.linalg.norm(vecs, axis=1).max(), rtol)
    mats = basis.reshape(-1, d, d)
    adj = project_residual(basis, mats.conj().swapaxes(-1, -2).reshape(-1, d * d))
    unit = project_residual(basis, np.eye(d).reshape(1, -1) / np.sqrt(d))
    return SliceSpan(mats, float(np.max(adj, initial=0.0)), float(unit[0]))


@dataclass(eq=False)
class PisierDecomposition:
    """``C = M_n (x) D`` for a unital embedding ``gamma: M_n -> C``.

    ``basis`` holds coefficient vectors (rows) of a Hilbert-Schmidt orthonormal
    basis of the relative commutant ``D``.
    """

    n: int
    C: FiniteQuantumSpace
    gamma: BlockLinearMap
    basis: np.ndarray
    block_dims: tuple[int, ...]
    gamma_singular_min: float
    multiplicativity_residual: float

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    def basis_elements(self) -> list[AlgebraElement]:
        return [AlgebraElement.from_coeffs(self.C, b) for b in self.basis]

    def _E(self, i: int, j: int) -> AlgebraElement:
        return self.gamma.image(0, i, j)

    def decompose(self, c: AlgebraElement) -> list[list[AlgebraElement]]:
        """``c_ij = sum_k E_ki c E_jk`` in ``D``, so that ``c = sum E_ij c_ij``."""
        n = self.n
        E = [[self._E(i, j) for j in range(n)] for i in range(n)]
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = E[0][i] @ c @ E[j][0]
                for k in range(1, n):
                    acc = acc + E[k][i] @ c @ E[j][k]
                row.append(acc)
            out.append(row)
        return out

    def compose(self, parts) -> AlgebraElement:
        acc = None
        for i in range(self.n):
            for j in range(self.n):
                term = self._E(i, j) @ parts[i][j]
                acc = term if acc is None else acc + term
        return acc

    def coordinates(self, b: AlgebraElement) -> np.ndarray:
        """Coefficients of ``b`` in the orthonormal basis of ``D``."""
        return self.basis.conj() @ b.coeffs


def pisier_decompose(gamma: BlockLinearMap, tol: float = DEFAULT_TOL,
                     rtol: float = RANK_RTOL) -> PisierDecomposition:
    """Relative commutant of ``gamma(M_n)`` in ``C = gamma.cod`` and the isomorphism data."""
    if gamma.dom.n_blocks != 1:
        raise DomainError(f"gamma must start at a single matrix block, got {gamma.dom!r}")
    n = gamma.dom.blocks[0]
    C = gamma.cod
    hom = is_star_homomorphism(gamma, tol)
    if not hom.ok:
        worst = max(hom.unitality_defect, hom.adjoint_defect, hom.multiplicativity_defect)
        raise PreconditionError(f"gamma is not a unital *-homomorphism (defect {worst:.3g})",
                                residual=worst, witness=hom.worst_pair)

    rows = []
    dims = []
    all_sv = []
    per_block = []
    for c, E in enumerate(gamma.block_images()):
        nc = C.blocks[c]
        eye = np.eye(nc)
        # row-major vec: vec(E X) = (E (x) I) vec X, vec(X E) = (I (x) E^T) vec X
        system = np.concatenate([np.kron(eye, e.T) - np.kron(e, eye) for e in E])
        _, s, vh = np.linalg.svd(system)
        all_sv.append(s)
        scale = max(s[0] if s.size else 0.0, 1.0)
        rank = int(np.sum(s > rtol * scale))
        null = vh[rank:].conj()  # rows of V^H are conjugated null vectors
        dims.append(null.shape[0])
        per_block.append((E, null.reshape(-1, nc, nc)))
        for v in null:
            coeff = np.zeros(C.algebra_dim, dtype=complex)
            coeff[C.block_slice(c)] = v
            rows.append(coeff)
    basis = np.array(rows, dtype=complex).reshape(-1, C.algebra_dim)
    dim_d = basis.shape[0]
    if n * n * dim_d != C.algebra_dim:
        raise RankError(f"dimension identity failed: {n}^2 * {dim_d} != {C.algebra_dim}; "
                        f"per-block commutant dimensions {dims}", singular_values=all_sv)

    # Gamma(e_ij (x) b) = E_ij b: columns of a square matrix on C
    cols = []
    mult = 0.0
    for c, (E, B) in enumerate(per_block):
        if B.shape[0] == 0:
            continue
        g = np.einsum("axy,ryz->arxz", E, B)  # (n^2, r, nc, nc)
        sl = C.block_slice(c)
        for a in range(n * n):
            for r in range(B.shape[0]):
                col = np.zeros(C.algebra_dim, dtype=complex)
                col[sl] = g[a, r].reshape(-1)
                cols.append(col)
        # E_ij b E_i'j' b' = delta_{j i'} E_ij' b b'
        lhs = np.einsum("arxy,bsyz->arbsxz", g, g)
        bb = np.einsum("rxy,syz->rsxz", B, B)
        Eg = E.reshape(n, n, *E.shape[1:])
        rhs = np.einsum("jk,ilxy,rsyz->ijrklsxz", np.eye(n), Eg, bb)
        rhs = rhs.reshape(n * n, B.shape[0], n * n, B.shape[0], *rhs.shape[-2:])
        mult = max(mult, float(np.max(np.abs(lhs - rhs))))
    gmat = np.array(cols).T
    sv = np.linalg.svd(gmat, compute_uv=False)
    if sv[-1] <= rtol * sv[0]:
        raise RankError(f"Gamma is not bijective: smallest singular value {sv[-1]:.3g}",
                        singular_values=sv)
    return PisierDecomposition(n, C, gamma, basis, tuple(dims), float(sv[-1]), mult)
