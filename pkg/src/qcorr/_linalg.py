"""Small dense linear-algebra helpers used across modules."""
from __future__ import annotations

import numpy as np

DEFAULT_TOL = 1e-9
RANK_RTOL = 1e-8


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + np.conj(np.swapaxes(m, -1, -2))) / 2


def min_eigenvalue(m: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``m``."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(hermitize(m))[0])


def psd_threshold(m: np.ndarray, tol: float) -> float:
    """Lower bound an eigenvalue may reach and still count as non-negative."""
    norm = np.linalg.norm(m, np.inf) if np.asarray(m).size else 0.0
    return -tol * (1.0 + norm)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR factorization of a complex Ginibre matrix.

    The diagonal of R is rotated onto the positive reals, otherwise Q is not Haar.
    """
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    phases = diag / np.abs(diag)
    return q * phases[None, :]


def orthonormal_rows(vectors: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (as rows) for the row span of ``vectors``.

    Singular values below ``rtol`` times the largest one are treated as zero.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if vectors.shape[0] == 0:
        return np.zeros((0, vectors.shape[1]), dtype=complex)
    _, s, vh = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, vectors.shape[1]), dtype=complex)
    rank = int(np.sum(s > rtol * s[0]))
    return vh[:rank]


def extend_basis(basis: np.ndarray, candidates: np.ndarray, rtol: float = RANK_RTOL,
                 chunk: int = 64) -> np.ndarray:
    """Grow an orthonormal row basis by the directions of ``candidates`` it misses.

    The rank cutoff is ``rtol`` times the largest candidate norm, so tiny
    rounding residue (products that vanish in exact arithmetic) is not promoted
    to a direction. Work proceeds in chunks to keep the SVDs small.
    """
    basis = np.asarray(basis, dtype=complex)
    cands = np.asarray(candidates, dtype=complex)
    if cands.shape[0] == 0:
        return basis
    scale = float(np.max(np.linalg.norm(cands, axis=1)))
    if scale == 0.0:
        return basis
    cands = cands / scale
    for start in range(0, cands.shape[0], chunk):
        block = cands[start:start + chunk]
        if basis.shape[0] == basis.shape[1]:
            break
        if basis.shape[0]:
            # two passes of projection: classical Gram-Schmidt loses orthogonality otherwise
            for _ in range(2):
                block = block - (block @ basis.conj().T) @ basis
        _, s, vh = np.linalg.svd(block, full_matrices=False)
        keep = s > rtol
        if np.any(keep):
            basis = np.vstack([basis, vh[keep]]) if basis.shape[0] else vh[keep]
    return basis


def project_residual(basis: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Norm of the component of each row of ``vectors`` orthogonal to ``basis``."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if basis.shape[0] == 0:
        return np.linalg.norm(vectors, axis=1)
    rest = vectors - (vectors @ basis.conj().T) @ basis
    return np.linalg.norm(rest, axis=1)
