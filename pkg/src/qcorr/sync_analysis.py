"""Vectorized GNS realizations of trace-induced correlations and the synchronous analysis.

For ``tau = Tr/d`` the GNS space of ``M_d`` is ``C^d (x) C^d`` with row-major
vectorization, ``(A (x) B) vec(M) = vec(A M B^T)`` and cyclic vector
``xi = vec(I)/sqrt(d)``. The left leg acts by ``U (x) I``; the right leg acts by
``I (x) Ubar`` where ``Ubar`` are the generators of the opposite family.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ._linalg import DEFAULT_TOL, RANK_RTOL, extend_basis, orthonormal_rows
from .correlation import (CorrelationTensor, Realization, _kron_stack, _pair_values,
                          _to_tensor, correlation_from_realization, is_nonsignalling,
                          sync_sum)
from .errors import (InternalConsistencyError, PreconditionError, UnsupportedInputError)
from .qfamily import POVMFamily, QuantumFamily, opposite_family, validate_family


def gns_realization_from_trace(F: QuantumFamily, tol: float = DEFAULT_TOL) -> Realization:
    """Realization ``(U (x) I, I (x) Ubar, vec(I)/sqrt(d))`` of the correlation of ``Tr/d``."""
    rep = validate_family(F, tol)
    if not rep.ok:
        raise PreconditionError(f"family is not a unital *-homomorphism "
                                f"(max violation {rep.max_violation:.3g})",
                                residual=rep.max_violation, witness=rep.worst)
    d = F.d
    eye = np.eye(d)
    left = _kron_stack(F.gens, eye)
    right = _kron_stack(eye, opposite_family(F).gens)
    xi = eye.reshape(-1) / np.sqrt(d)
    cls = type(F)
    return Realization.from_vector(cls(F.P, F.O, d * d, left), cls(F.P, F.O, d * d, right),
                                   xi, tol=tol)


def algebra_closure(S, cap: int | None = None, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of the unital *-algebra generated by ``S``.

    Starts from ``span(S, S*, I)`` and keeps multiplying newly found directions
    by the generators until nothing new appears. Returns shape ``(r, d, d)``.
    """
    S = np.asarray(S, dtype=complex)
    if S.ndim == 2:
        S = S[None]
    d = S.shape[-1]
    cap = d * d if cap is None else cap
    flat = S.reshape(-1, d * d)
    adj = S.conj().swapaxes(-1, -2).reshape(-1, d * d)
    gens = orthonormal_rows(np.concatenate([flat, adj]), rtol) if flat.size else np.zeros((0, d * d))
    basis = extend_basis(np.eye(d).reshape(1, -1) / np.sqrt(d), gens, rtol)
    if basis.shape[0] > cap:
        raise InternalConsistencyError(f"closure exceeded cap {cap}")
    g = gens.reshape(-1, d, d)
    frontier = basis
    while frontier.shape[0] and g.shape[0] and basis.shape[0] < d * d:
        before = basis.shape[0]
        for f in frontier.reshape(-1, d, d):
            basis = extend_basis(basis, (f @ g).reshape(-1, d * d), rtol)
            if basis.shape[0] > cap:
                raise InternalConsistencyError(f"closure exceeded cap {cap} without stabilizing")
        frontier = basis[before:]
    return basis.reshape(-1, d, d)


def _density_of(omega, d: int) -> np.ndarray:
    if hasattr(omega, "density"):
        return omega.density.mats[0]
    rho = np.asarray(omega, dtype=complex)
    if rho.ndim == 1:
        return np.outer(rho, rho.conj())
    return rho


def trace_defect(omega, basis: np.ndarray) -> tuple[float, tuple | None]:
    """``max |omega(ab) - omega(ba)|`` over basis pairs and the pair attaining it."""
    basis = np.asarray(basis, dtype=complex)
    if basis.shape[0] == 0:
        return 0.0, None
    rho = _density_of(omega, basis.shape[-1])
    vals = _pair_values(rho, basis, basis, vector=False)
    gap = np.abs(vals - vals.T)
    a, b = np.unravel_index(int(np.argmax(gap)), gap.shape)
    return float(gap[a, b]), (int(a), int(b))


def trace_check_on_algebra(omega, basis: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """Residual of the trace property of ``omega`` (density, vector or state) on ``span(basis)``.

    ``omega`` is tracial on the algebra iff the returned value is ``<= tol``.
    """
    return trace_defect(omega, basis)[0]


@dataclass
class SyncReport:
    synchronous: bool
    sync_sum: float
    sync_defect: float
    nonsignalling_residual: float
    wu_residual: float | None = None
    traciality_residual: float | None = None
    traciality_residual_left: float | None = None
    traciality_residual_right: float | None = None
    reconstruction_residual: float | None = None
    vectors_match: bool | None = None
    left_trace: bool | None = None
    right_trace: bool | None = None
    equals_trace_correlation: bool | None = None

    @property
    def ok(self) -> bool:
        checks = (self.vectors_match, self.left_trace, self.right_trace,
                  self.equals_trace_correlation)
        return self.synchronous and all(c is True for c in checks)

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return asdict(self)


def analyze_synchronous_realization(R: Realization, tol: float = DEFAULT_TOL) -> SyncReport:
    """Check the consequences of synchronicity for a homomorphism realization with a vector state.

    With ``U``, ``W`` the generators of the two legs: ``W xi = U* xi``
    generator-wise, the vector state is tracial on both generated algebras, and
    ``X = <xi, U U' xi>`` with the transposed second index reproduces ``T``.
    Without synchronicity only the defect is reported.
    """
    for name, F in (("phi1", R.phi1), ("phi2", R.phi2)):
        if isinstance(F, POVMFamily):
            raise UnsupportedInputError(f"{name} is a POVM family; homomorphisms are required")
        rep = validate_family(F, tol)
        if not rep.ok:
            raise UnsupportedInputError(f"{name} is not a unital *-homomorphism "
                                        f"(max violation {rep.max_violation:.3g})")
    xi = R.xi
    if xi is None:
        w, v = np.linalg.eigh(R.density)
        if w[-1] < 1 - tol:
            raise UnsupportedInputError("mixed states are not supported; give a vector state")
        xi = v[:, -1]

    T = correlation_from_realization(R, tol)
    total = sync_sum(T)
    defect = abs(total - T.P.n_blocks)
    report = SyncReport(defect <= tol, total, defect, is_nonsignalling(T, tol).residual)
    if not report.synchronous:
        return report

    d = R.d
    u = R.phi1.gens.reshape(-1, d, d)
    w = R.phi2.gens.reshape(-1, d, d)
    uadj = u.conj().swapaxes(-1, -2)
    report.wu_residual = float(np.max(np.linalg.norm(w @ xi - uadj @ xi, axis=1), initial=0.0))

    rho = np.outer(xi, xi.conj())
    tl = trace_check_on_algebra(rho, algebra_closure(u), tol)
    tr = trace_check_on_algebra(rho, algebra_closure(w), tol)
    report.traciality_residual_left = tl
    report.traciality_residual_right = tr
    report.traciality_residual = max(tl, tr)

    ut = R.phi1.gens[R.O.transpose_perm][:, R.P.transpose_perm].reshape(-1, d, d)
    x_tau = _to_tensor(_pair_values(xi, u, ut, vector=True), R.O.algebra_dim, R.P.algebra_dim)
    report.reconstruction_residual = float(np.max(np.abs(T.X - x_tau), initial=0.0))

    report.vectors_match = report.wu_residual <= tol
    report.left_trace = tl <= tol
    report.right_trace = tr <= tol
    report.equals_trace_correlation = report.reconstruction_residual <= tol
    return report


def state_correlation(F: QuantumFamily, omega) -> CorrelationTensor:
    """``X[u,u',v,v'] = omega(U[u,v] U[Tu',Tv'])`` for any state on ``M_d``, tracial or not."""
    from .correlation import correlation_from_trace
    return correlation_from_trace(F, omega, check_trace=False)
