"""(P, O)-correlations as coefficient tensors.

A correlation ``T: C(O) (x) C(O) -> C(P) (x) C(P)`` is stored as

    T(e_u (x) e_u') = sum_{v, v'} X[u, u', v, v'] f_v (x) f_v'

with ``u, u'`` O-unit indices and ``v, v'`` P-unit indices. In nested form this
is ``X[k][k'][l][l'][i][j][i'][j'][s][t][s'][t']``; only the flat layout is kept
in memory.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._linalg import DEFAULT_TOL
from .cpmap import BlockLinearMap
from .errors import DomainError, InternalConsistencyError, PreconditionError
from .qfamily import (CommutationReport, POVMFamily, QuantumFamily, commutes_second_leg,
                      unit_label)
from .qspace import (AlgebraElement, FiniteQuantumSpace, StateFunctional, _as_space,
                     act_on_vector, maximally_entangled_vector, tensor_space,
                     tensor_unit_index)


@dataclass(frozen=True, eq=False)
class CorrelationTensor:
    P: FiniteQuantumSpace
    O: FiniteQuantumSpace
    X: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", _as_space(self.P))
        object.__setattr__(self, "O", _as_space(self.O))
        x = np.array(self.X, dtype=complex)
        do, dp = self.O.algebra_dim, self.P.algebra_dim
        if x.shape != (do, do, dp, dp):
            raise DomainError(f"X has shape {x.shape}, expected {(do, do, dp, dp)}")
        x.flags.writeable = False
        object.__setattr__(self, "X", x)

    def entry(self, k, kp, l, lp, i, j, ip, jp, s, t, sp, tp) -> complex:
        O, P = self.O, self.P
        return complex(self.X[O.unit_index(k, i, j), O.unit_index(kp, ip, jp),
                              P.unit_index(l, s, t), P.unit_index(lp, sp, tp)])

    def as_map(self) -> BlockLinearMap:
        """The linear map ``C(O) (x) C(O) -> C(P) (x) C(P)``."""
        dom, cod = tensor_space(self.O, self.O), tensor_space(self.P, self.P)
        io_ = tensor_unit_index(self.O, self.O).reshape(-1)
        ip_ = tensor_unit_index(self.P, self.P).reshape(-1)
        do, dp = self.O.algebra_dim, self.P.algebra_dim
        m = np.zeros((cod.algebra_dim, dom.algebra_dim), dtype=complex)
        m[ip_[:, None], io_[None, :]] = self.X.transpose(2, 3, 0, 1).reshape(dp * dp, do * do)
        return BlockLinearMap(dom, cod, m)

    def __call__(self, x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
        """``T(x (x) y)`` in ``tensor_space(P, P)``."""
        if x.space != self.O or y.space != self.O:
            raise DomainError("arguments must live on O")
        c = np.einsum("a,b,abvw->vw", x.coeffs, y.coeffs, self.X)
        cod = tensor_space(self.P, self.P)
        out = np.zeros(cod.algebra_dim, dtype=complex)
        out[tensor_unit_index(self.P, self.P).reshape(-1)] = c.reshape(-1)
        return AlgebraElement.from_coeffs(cod, out)

    def hermiticity_residual(self) -> float:
        """``max |conj X[u,u',v,v'] - X[Tu,Tu',Tv,Tv']|`` with ``T`` the unit transposition."""
        tO, tP = self.O.transpose_perm, self.P.transpose_perm
        flipped = self.X[np.ix_(tO, tO, tP, tP)]
        return float(np.max(np.abs(self.X.conj() - flipped), initial=0.0))


def _as_density(state, d: int, tol: float) -> np.ndarray:
    if isinstance(state, StateFunctional):
        if not state.is_single_block or state.space.blocks[0] != d:
            raise DomainError(f"state must live on M_{d}")
        return state.density.mats[0]
    rho = np.asarray(state, dtype=complex)
    if rho.shape != (d, d):
        raise DomainError(f"density has shape {rho.shape}, expected {(d, d)}")
    StateFunctional.from_density(rho, tol)
    return rho


@dataclass(frozen=True, eq=False)
class Realization:
    """Two families over the same ``(P, O, d)`` and a state on ``M_d``.

    Exactly one of ``xi`` (unit vector) and ``density`` is set. Commutation of
    the families on the second leg is measured at construction and kept in
    ``commutation``; with ``strict`` a failure raises immediately.
    """

    phi1: QuantumFamily
    phi2: QuantumFamily
    xi: np.ndarray | None = None
    density: np.ndarray | None = None
    tol: float = DEFAULT_TOL
    strict: bool = True
    commutation: CommutationReport | None = field(default=None, compare=False)

    def __post_init__(self):
        a, b = self.phi1, self.phi2
        if a.P != b.P or a.O != b.O or a.d != b.d:
            raise DomainError("the two families must share P, O and d")
        if (self.xi is None) == (self.density is None):
            raise DomainError("give exactly one of xi and density")
        if self.xi is not None:
            xi = np.array(self.xi, dtype=complex).reshape(-1)
            if xi.shape != (a.d,):
                raise DomainError(f"xi has length {xi.size}, expected {a.d}")
            if abs(np.linalg.norm(xi) - 1) > self.tol:
                raise DomainError(f"xi must be a unit vector, norm is {np.linalg.norm(xi):.12g}")
            xi.flags.writeable = False
            object.__setattr__(self, "xi", xi)
        else:
            rho = np.array(_as_density(self.density, a.d, self.tol))
            rho.flags.writeable = False
            object.__setattr__(self, "density", rho)
        rep = commutes_second_leg(a, b, self.tol)
        object.__setattr__(self, "commutation", rep)
        if self.strict and not rep.ok:
            raise PreconditionError(f"families do not commute on the second leg "
                                    f"(max commutator {rep.max_commutator:.3g})",
                                    residual=rep.max_commutator, witness=rep.witness)

    @classmethod
    def from_vector(cls, phi1, phi2, xi, tol: float = DEFAULT_TOL, strict: bool = True):
        return cls(phi1, phi2, xi=xi, tol=tol, strict=strict)

    @classmethod
    def from_density(cls, phi1, phi2, density, tol: float = DEFAULT_TOL, strict: bool = True):
        return cls(phi1, phi2, density=density, tol=tol, strict=strict)

    @property
    def P(self) -> FiniteQuantumSpace:
        return self.phi1.P

    @property
    def O(self) -> FiniteQuantumSpace:
        return self.phi1.O

    @property
    def d(self) -> int:
        return self.phi1.d

    def state_matrix(self) -> np.ndarray:
        if self.xi is not None:
            return np.outer(self.xi, self.xi.conj())
        return self.density


def _pair_values(rho_or_xi, left: np.ndarray, right: np.ndarray, vector: bool) -> np.ndarray:
    """``omega(A_a B_b)`` for stacks ``left`` (Ga, d, d) and ``right`` (Gb, d, d)."""
    d = left.shape[-1]
    if vector:
        xi = rho_or_xi
        lv = np.einsum("p,apq->aq", xi.conj(), left)
        rv = np.einsum("bqr,r->bq", right, xi)
        return lv @ rv.T
    a = (rho_or_xi @ left).reshape(-1, d * d)
    b = right.swapaxes(-1, -2).reshape(-1, d * d)
    return a @ b.T


def _to_tensor(vals: np.ndarray, do: int, dp: int) -> np.ndarray:
    return vals.reshape(do, dp, do, dp).transpose(0, 2, 1, 3)


def correlation_from_realization(R: Realization, tol: float | None = None) -> CorrelationTensor:
    """``X[u,u',v,v'] = omega(U[u,v] W[u',v'])``."""
    tol = R.tol if tol is None else tol
    if R.commutation.max_commutator > tol:
        raise PreconditionError(f"families do not commute on the second leg "
                                f"(max commutator {R.commutation.max_commutator:.3g})",
                                residual=R.commutation.max_commutator,
                                witness=R.commutation.witness)
    d = R.d
    u = R.phi1.gens.reshape(-1, d, d)
    w = R.phi2.gens.reshape(-1, d, d)
    if R.xi is not None:
        vals = _pair_values(R.xi, u, w, vector=True)
    else:
        vals = _pair_values(R.density, u, w, vector=False)
    return CorrelationTensor(R.P, R.O, _to_tensor(vals, R.O.algebra_dim, R.P.algebra_dim))


@dataclass
class NonsignallingReport:
    ok: bool
    residual: float
    left_residual: float
    right_residual: float

    def __bool__(self):
        return self.ok


def is_nonsignalling(T: CorrelationTensor, tol: float = DEFAULT_TOL) -> NonsignallingReport:
    """Marginals ``T(x (x) 1)`` and ``T(1 (x) y)`` factor through one leg.

    The slice is taken with the dimension-weighted tracial state on P.
    """
    one_o, one_p = T.O.unit_vector, T.P.unit_vector
    psi0 = one_p / T.P.hilbert_dim
    left = np.einsum("b,abvw->avw", one_o, T.X)
    right = np.einsum("a,abvw->bvw", one_o, T.X)
    left_slice = left @ psi0
    right_slice = np.einsum("v,bvw->bw", psi0, right)
    lres = float(np.max(np.abs(left - left_slice[:, :, None] * one_p[None, None, :]), initial=0.0))
    rres = float(np.max(np.abs(right - one_p[None, :, None] * right_slice[:, None, :]), initial=0.0))
    res = max(lres, rres)
    return NonsignallingReport(res <= tol, res, lres, rres)


def _sync_terms(T: CorrelationTensor) -> np.ndarray:
    """``X[u,u,v,v] / (n_k m_l)`` as an (O.algebra_dim, P.algebra_dim) array."""
    do, dp = T.O.algebra_dim, T.P.algebra_dim
    diag = T.X[np.arange(do), np.arange(do)][:, np.arange(dp), np.arange(dp)]
    return diag * T.O.unit_weights[:, None] * T.P.unit_weights[None, :]


def sync_sum(T: CorrelationTensor) -> float:
    """Weighted diagonal sum; equals ``N_P`` exactly for synchronous correlations."""
    return float(np.sum(_sync_terms(T)).real)


def sync_imaginary_part(T: CorrelationTensor) -> float:
    return float(np.sum(_sync_terms(T)).imag)


def sync_partial_sums(T: CorrelationTensor) -> np.ndarray:
    """Contribution of each P-block ``l`` to :func:`sync_sum`."""
    terms = _sync_terms(T).real.sum(axis=0)
    return np.array([terms[T.P.block_slice(l)].sum() for l in range(T.P.n_blocks)])


def entangled_sync_value(T: CorrelationTensor) -> complex:
    """``<phi, T(sum_u (1/n_k) e_u (x) e_u) phi>`` with ``phi`` maximally entangled."""
    O, P = T.O, T.P
    oo = tensor_space(O, O)
    z = np.zeros(oo.algebra_dim, dtype=complex)
    idx = tensor_unit_index(O, O)
    z[idx[np.arange(O.algebra_dim), np.arange(O.algebra_dim)]] = O.unit_weights
    image = T.as_map().apply(AlgebraElement.from_coeffs(oo, z))
    phi = maximally_entangled_vector(P).vector
    return complex(np.vdot(phi, act_on_vector(image, phi, P)))


@dataclass
class SyncCheck:
    ok: bool
    sync_sum: float
    sync_defect: float
    imaginary_part: float
    entangled_value: complex
    partial_sums: list = field(default_factory=list)
    # smallest real part of the diagonal coefficients X[u,u,v,v]; reported, not judged
    min_diagonal: float = 0.0

    def __bool__(self):
        return self.ok


def is_synchronous(T: CorrelationTensor, tol: float = DEFAULT_TOL) -> SyncCheck:
    """``|sync_sum - N_P| <= tol``, cross-checked against the entangled-vector formula."""
    total = sync_sum(T)
    ent = entangled_sync_value(T)
    n = T.P.n_blocks
    if abs(ent * n - total - 1j * sync_imaginary_part(T)) > 1e-10 * (1 + abs(total)):
        raise InternalConsistencyError(
            f"coefficient sum {total!r} and entangled value {ent!r} * {n} disagree")
    defect = abs(total - n)
    do, dp = T.O.algebra_dim, T.P.algebra_dim
    diag = T.X[np.arange(do), np.arange(do)][:, np.arange(dp), np.arange(dp)]
    return SyncCheck(defect <= tol, total, defect, sync_imaginary_part(T), ent,
                     sync_partial_sums(T).tolist(), float(diag.real.min()))


def correlation_from_trace(F: QuantumFamily, tau=None, tol: float = DEFAULT_TOL,
                           check_trace: bool = True) -> CorrelationTensor:
    """``X[u,u',v,v'] = tau(U[u,v] U[Tu',Tv'])`` with ``T`` transposing unit indices.

    ``tau`` is a density matrix or single-block state on ``M_d``; the default is
    ``Tr/d``. Unless ``check_trace`` is off, ``tau`` must be tracial on the
    algebra generated by the generators.
    """
    d = F.d
    rho = np.eye(d, dtype=complex) / d if tau is None else _as_density(tau, d, tol)
    u = F.gens.reshape(-1, d, d)
    ut = F.gens[F.O.transpose_perm][:, F.P.transpose_perm].reshape(-1, d, d)
    if check_trace and np.max(np.abs(rho - np.trace(rho) / d * np.eye(d))) > tol:
        # cheap witness search on words of length two first
        vals = _pair_values(rho, u, u, vector=False)
        gap = np.abs(vals - vals.T)
        a, b = np.unravel_index(int(np.argmax(gap)), gap.shape)
        if gap[a, b] > tol:
            shape = F.gens.shape[:2]
            wa, wb = np.unravel_index(a, shape), np.unravel_index(b, shape)
            witness = ((unit_label(F.O, wa[0]), unit_label(F.P, wa[1])),
                       (unit_label(F.O, wb[0]), unit_label(F.P, wb[1])))
            raise PreconditionError(f"tau is not tracial: |tau(ab) - tau(ba)| = {gap[a, b]:.3g} "
                                    f"for generators a, b = {witness}",
                                    residual=float(gap[a, b]), witness=witness)
        from .sync_analysis import algebra_closure, trace_defect
        basis = algebra_closure(u)
        res, pair = trace_defect(rho, basis)
        if res > tol:
            raise PreconditionError(f"tau is not tracial on the generated algebra "
                                    f"(residual {res:.3g} at basis pair {pair})",
                                    residual=res, witness=pair)
    vals = _pair_values(rho, u, ut, vector=False)
    return CorrelationTensor(F.P, F.O, _to_tensor(vals, F.O.algebra_dim, F.P.algebra_dim))


def _require_classical(*spaces: FiniteQuantumSpace):
    for s in spaces:
        if not s.is_classical:
            raise DomainError(f"{s!r} is not classical (all blocks must have size 1)")


@dataclass
class ClassicalTable:
    """``p[k, k', l, l']`` is the probability of answers ``(k, k')`` to questions ``(l, l')``."""

    p: np.ndarray
    left_marginal: np.ndarray
    right_marginal: np.ndarray
    min_entry: float
    normalization_defect: float
    signalling_defect: float

    def is_valid(self, tol: float = DEFAULT_TOL) -> bool:
        return self.min_entry >= -tol and self.normalization_defect <= tol

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "k'", "l", "l'", "p"])
        for idx in np.ndindex(*self.p.shape):
            w.writerow([*idx, repr(float(self.p[idx]))])
        return buf.getvalue()


def classical_table(T: CorrelationTensor) -> ClassicalTable:
    _require_classical(T.P, T.O)
    p = T.X.real.copy()
    left = p.sum(axis=1)   # [k, l, l']
    right = p.sum(axis=0)  # [k', l, l']
    norm = np.abs(p.sum(axis=(0, 1)) - 1.0)
    # a marginal may not depend on the partner's question
    sig = max(float(np.max(np.abs(left - left[:, :, :1]), initial=0.0)),
              float(np.max(np.abs(right - right[:, :1, :]), initial=0.0)))
    return ClassicalTable(p, left, right, float(p.min()), float(norm.max()), sig)


def from_classical_table(P, O, p) -> CorrelationTensor:
    """Embed a table ``p[k, k', l, l']`` as a correlation between classical spaces."""
    P, O = _as_space(P), _as_space(O)
    _require_classical(P, O)
    return CorrelationTensor(P, O, np.asarray(p, dtype=float))


def deterministic_realization(P, O, f: Sequence[int]) -> Realization:
    """Both players answer ``f(l)`` to question ``l``; ``d = 1``."""
    P, O = _as_space(P), _as_space(O)
    _require_classical(P, O)
    f = [int(x) for x in f]
    if len(f) != P.n_blocks or any(not 0 <= x < O.n_blocks for x in f):
        raise DomainError(f"f must send each of the {P.n_blocks} questions to one of "
                          f"{O.n_blocks} answers, got {f}")
    gens = np.zeros((O.n_blocks, P.n_blocks, 1, 1))
    gens[f, np.arange(P.n_blocks), 0, 0] = 1.0
    F = QuantumFamily(P, O, 1, gens)
    return Realization.from_vector(F, F, [1.0])


def _kron_stack(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product over the last two axes of two broadcast-compatible stacks."""
    da, db = a.shape[-1], b.shape[-1]
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    return out.reshape(*out.shape[:-4], da * db, da * db)


def product_realization(F1: QuantumFamily, F2: QuantumFamily, xi=None, density=None,
                        tol: float = DEFAULT_TOL) -> Realization:
    """``U (x) I`` and ``I (x) W`` on ``C^{d1} (x) C^{d2}`` with a state there."""
    if F1.P != F2.P or F1.O != F2.O:
        raise DomainError("the two families must share P and O")
    left = _kron_stack(F1.gens, np.eye(F2.d))
    right = _kron_stack(np.eye(F1.d), F2.gens)
    cls1 = POVMFamily if isinstance(F1, POVMFamily) else QuantumFamily
    cls2 = POVMFamily if isinstance(F2, POVMFamily) else QuantumFamily
    d = F1.d * F2.d
    return Realization(cls1(F1.P, F1.O, d, left), cls2(F2.P, F2.O, d, right),
                       xi=xi, density=density, tol=tol)
