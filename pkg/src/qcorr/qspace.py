"""Finite quantum spaces and elements of their function algebras.

A finite quantum space is described by the block sizes ``[n_1, ..., n_N]`` of
its algebra ``M_{n_1} + ... + M_{n_N}``. Elements are kept as per-block complex
matrices. Indices are 0-based throughout the Python API.

Matrix units are enumerated block by block and row-major inside a block, so the
unit ``e^k_{ij}`` has position ``unit_offsets[k] + i * n_k + j``. This "unit
index" is the flat coordinate system used by every coefficient array in the
package.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from ._linalg import DEFAULT_TOL, min_eigenvalue, psd_threshold
from .errors import DomainError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FiniteQuantumSpace:
    """Ordered list of matrix-block dimensions."""

    blocks: tuple[int, ...]

    def __post_init__(self):
        try:
            blocks = tuple(operator.index(b) for b in self.blocks)
        except TypeError as exc:
            raise DomainError(f"block sizes must be integers, got {self.blocks!r}") from exc
        if not blocks:
            raise DomainError("a finite quantum space needs at least one block")
        if any(b < 1 for b in blocks):
            raise DomainError(f"block sizes must be positive, got {list(blocks)}")
        object.__setattr__(self, "blocks", blocks)

    def __repr__(self):
        return f"FiniteQuantumSpace({list(self.blocks)})"

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def algebra_dim(self) -> int:
        return sum(n * n for n in self.blocks)

    @property
    def hilbert_dim(self) -> int:
        return sum(self.blocks)

    @property
    def is_classical(self) -> bool:
        return all(n == 1 for n in self.blocks)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        """Start of each block on the Hilbert space ``C^{n_1} + ... + C^{n_N}``."""
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.blocks)[:-1]]))

    @cached_property
    def unit_offsets(self) -> tuple[int, ...]:
        sq = [n * n for n in self.blocks]
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(sq)[:-1]]))

    def block_slice(self, k: int) -> slice:
        start = self.unit_offsets[k]
        return slice(start, start + self.blocks[k] ** 2)

    @cached_property
    def units(self) -> np.ndarray:
        """Array of shape (algebra_dim, 3) listing ``(k, i, j)`` for every unit."""
        rows = [(k, i, j) for k, n in enumerate(self.blocks) for i in range(n) for j in range(n)]
        return _frozen(np.array(rows, dtype=np.intp).reshape(-1, 3))

    def unit_index(self, k: int, i: int, j: int) -> int:
        if not 0 <= k < self.n_blocks:
            raise DomainError(f"block index {k} out of range for {self!r}")
        n = self.blocks[k]
        if not (0 <= i < n and 0 <= j < n):
            raise DomainError(f"matrix index ({i}, {j}) out of range for block {k} of size {n}")
        return self.unit_offsets[k] + i * n + j

    @cached_property
    def block_of_unit(self) -> np.ndarray:
        return _frozen(self.units[:, 0].copy())

    @cached_property
    def transpose_perm(self) -> np.ndarray:
        """``transpose_perm[u]`` is the unit index of ``e^k_{ji}`` for ``u = e^k_{ij}``."""
        k, i, j = self.units.T
        offs = np.asarray(self.unit_offsets)[k]
        sizes = np.asarray(self.blocks)[k]
        return _frozen(offs + j * sizes + i)

    @cached_property
    def product_table(self) -> np.ndarray:
        """``product_table[a, b]`` is the unit ``e_a e_b`` or -1 when the product vanishes."""
        d = self.algebra_dim
        table = np.full((d, d), -1, dtype=np.intp)
        for k, n in enumerate(self.blocks):
            idx = self.unit_offsets[k] + np.arange(n * n).reshape(n, n)
            table[idx[:, :, None], idx[None, :, :]] = idx[:, None, :]
        return _frozen(table)

    @cached_property
    def unit_vector(self) -> np.ndarray:
        """Coefficients of the identity in the matrix-unit basis."""
        _, i, j = self.units.T
        return _frozen((i == j).astype(float))

    @cached_property
    def unit_weights(self) -> np.ndarray:
        """``1 / n_k`` for every unit of block ``k``."""
        return _frozen(1.0 / np.asarray(self.blocks, dtype=float)[self.block_of_unit])

    def to_blocks(self, coeffs: np.ndarray) -> list[np.ndarray]:
        """Split a coefficient array (unit axis last) into per-block matrices."""
        coeffs = np.asarray(coeffs)
        lead = coeffs.shape[:-1]
        return [coeffs[..., self.block_slice(k)].reshape(*lead, n, n)
                for k, n in enumerate(self.blocks)]

    def from_blocks(self, mats: Sequence[np.ndarray]) -> np.ndarray:
        mats = [np.asarray(m) for m in mats]
        lead = mats[0].shape[:-2]
        return np.concatenate([m.reshape(*lead, -1) for m in mats], axis=-1)

    def dense(self, coeffs: np.ndarray) -> np.ndarray:
        """Block-diagonal matrix on the Hilbert space for a coefficient vector."""
        h = self.hilbert_dim
        out = np.zeros((h, h), dtype=complex)
        for k, m in enumerate(self.to_blocks(coeffs)):
            o, n = self.offsets[k], self.blocks[k]
            out[o:o + n, o:o + n] = m
        return out

    def compress(self, matrix: np.ndarray) -> np.ndarray:
        """Coefficients of the block-diagonal part of a Hilbert-space matrix."""
        matrix = np.asarray(matrix)
        return self.from_blocks([matrix[..., o:o + n, o:o + n]
                                 for o, n in zip(self.offsets, self.blocks)])

    def off_block_norm(self, matrix: np.ndarray) -> float:
        """Size of the part of ``matrix`` that does not belong to the algebra."""
        rest = np.array(matrix, dtype=complex)
        for o, n in zip(self.offsets, self.blocks):
            rest[..., o:o + n, o:o + n] = 0
        return float(np.max(np.abs(rest), initial=0.0))


def _as_space(blocks) -> FiniteQuantumSpace:
    if isinstance(blocks, FiniteQuantumSpace):
        return blocks
    return FiniteQuantumSpace(tuple(blocks))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """Element of ``M_{n_1} + ... + M_{n_N}`` given block by block."""

    space: FiniteQuantumSpace
    mats: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=complex) for m in self.mats)
        if len(mats) != self.space.n_blocks:
            raise DomainError(f"expected {self.space.n_blocks} blocks, got {len(mats)}")
        for k, (m, n) in enumerate(zip(mats, self.space.blocks)):
            if m.shape != (n, n):
                raise DomainError(f"block {k} has shape {m.shape}, expected {(n, n)}")
            m.flags.writeable = False
        object.__setattr__(self, "mats", mats)

    @classmethod
    def from_coeffs(cls, space: FiniteQuantumSpace, coeffs) -> "AlgebraElement":
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (space.algebra_dim,):
            raise DomainError(f"coefficient vector has shape {coeffs.shape}, "
                              f"expected ({space.algebra_dim},)")
        return cls(space, tuple(space.to_blocks(coeffs)))

    @classmethod
    def from_dense(cls, space: FiniteQuantumSpace, matrix, tol: float = DEFAULT_TOL) -> "AlgebraElement":
        matrix = np.asarray(matrix)
        h = space.hilbert_dim
        if matrix.shape != (h, h):
            raise DomainError(f"dense matrix has shape {matrix.shape}, expected {(h, h)}")
        off = space.off_block_norm(matrix)
        if off > tol * (1 + np.max(np.abs(matrix), initial=0.0)):
            raise DomainError(f"matrix has off-block entries of size {off:.3g}")
        return cls.from_coeffs(space, space.compress(matrix))

    @property
    def coeffs(self) -> np.ndarray:
        return self.space.from_blocks(self.mats)

    def dense(self) -> np.ndarray:
        return self.space.dense(self.coeffs)

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.space, tuple(m.conj().T for m in self.mats))

    def _check(self, other: "AlgebraElement"):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        if other.space != self.space:
            raise DomainError(f"elements live on different spaces: {self.space!r} vs {other.space!r}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.space, tuple(a + b for a, b in zip(self.mats, other.mats)))

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.space, tuple(a - b for a, b in zip(self.mats, other.mats)))

    def __neg__(self):
        return AlgebraElement(self.space, tuple(-a for a in self.mats))

    def __mul__(self, scalar):
        if isinstance(scalar, AlgebraElement):
            return NotImplemented
        return AlgebraElement(self.space, tuple(scalar * a for a in self.mats))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.space, tuple(a @ b for a, b in zip(self.mats, other.mats)))

    def norm(self) -> float:
        """C*-norm: the largest operator norm over blocks."""
        return max(float(np.linalg.norm(m, 2)) for m in self.mats)

    def allclose(self, other: "AlgebraElement", tol: float = DEFAULT_TOL) -> bool:
        self._check(other)
        return all(np.allclose(a, b, rtol=0, atol=tol) for a, b in zip(self.mats, other.mats))

    def __repr__(self):
        return f"AlgebraElement({self.space!r}, mats={[m.tolist() for m in self.mats]})"


def matrix_unit(space: FiniteQuantumSpace, k: int, i: int, j: int) -> AlgebraElement:
    """The matrix unit ``e^k_{ij}`` (0-based indices)."""
    c = np.zeros(space.algebra_dim, dtype=complex)
    c[space.unit_index(k, i, j)] = 1.0
    return AlgebraElement.from_coeffs(space, c)


def unit(space: FiniteQuantumSpace) -> AlgebraElement:
    return AlgebraElement.from_coeffs(space, space.unit_vector.astype(complex))


def zero(space: FiniteQuantumSpace) -> AlgebraElement:
    return AlgebraElement.from_coeffs(space, np.zeros(space.algebra_dim, dtype=complex))


def tensor_space(a: FiniteQuantumSpace, b: FiniteQuantumSpace) -> FiniteQuantumSpace:
    """Blocks ``a_i * b_j`` in lexicographic order (left factor major)."""
    return FiniteQuantumSpace(tuple(x * y for x in a.blocks for y in b.blocks))


def tensor_unit_index(a: FiniteQuantumSpace, b: FiniteQuantumSpace) -> np.ndarray:
    """``idx[u, w]`` is the unit of ``tensor_space(a, b)`` equal to ``e_u (x) e_w``."""
    ab = tensor_space(a, b)
    ka, ia, ja = a.units.T
    kb, ib, jb = b.units.T
    na = np.asarray(a.blocks)[ka][:, None]
    nb = np.asarray(b.blocks)[kb][None, :]
    block = ka[:, None] * b.n_blocks + kb[None, :]
    row = ia[:, None] * nb + ib[None, :]
    col = ja[:, None] * nb + jb[None, :]
    size = na * nb
    return np.asarray(ab.unit_offsets)[block] + row * size + col


def tensor(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    """``x (x) y`` as an element of ``tensor_space(x.space, y.space)``: Kronecker per block pair."""
    return AlgebraElement(tensor_space(x.space, y.space),
                          tuple(np.kron(p, q) for p in x.mats for q in y.mats))


def is_positive(x: AlgebraElement, tol: float = DEFAULT_TOL) -> bool:
    """True when every Hermitized block has spectrum above ``-tol * (1 + |block|)``."""
    return all(min_eigenvalue(m) >= psd_threshold(m, tol) for m in x.mats)


def block_trace(x: AlgebraElement, k: int) -> complex:
    """Unnormalized trace of block ``k``."""
    return complex(np.trace(x.mats[k]))


@dataclass(frozen=True, eq=False)
class StateFunctional:
    """Functional ``x -> sum_k Tr(rho_k x_k)`` with positive density blocks and unit mass."""

    space: FiniteQuantumSpace
    density: AlgebraElement
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.density.space != self.space:
            raise DomainError("density lives on a different space")
        if not is_positive(self.density, self.tol):
            worst = min(min_eigenvalue(m) for m in self.density.mats)
            raise DomainError(f"density is not positive semidefinite (min eigenvalue {worst:.3g})")
        mass = sum(np.trace(m) for m in self.density.mats)
        if abs(mass - 1) > self.tol:
            raise DomainError(f"state must have total mass 1, got {mass:.12g}")

    def __call__(self, x: AlgebraElement) -> complex:
        if x.space != self.space:
            raise DomainError("argument lives on a different space")
        # Tr(rho x) = sum_ij rho_ji x_ij
        return complex(sum(np.sum(r.T * m) for r, m in zip(self.density.mats, x.mats)))

    @classmethod
    def normalized_trace(cls, space: FiniteQuantumSpace) -> "StateFunctional":
        """Dimension-weighted tracial state ``x -> sum_k Tr(x_k) / sum_k n_k``."""
        h = space.hilbert_dim
        return cls(space, AlgebraElement(space, tuple(np.eye(n) / h for n in space.blocks)))

    @classmethod
    def from_density(cls, density, tol: float = DEFAULT_TOL) -> "StateFunctional":
        """State on a single matrix block ``M_d`` with the given density matrix."""
        density = np.asarray(density, dtype=complex)
        space = FiniteQuantumSpace((density.shape[0],))
        return cls(space, AlgebraElement(space, (density,)), tol)

    @classmethod
    def from_vector(cls, xi, tol: float = DEFAULT_TOL) -> "StateFunctional":
        xi = np.asarray(xi, dtype=complex).reshape(-1)
        return cls.from_density(np.outer(xi, xi.conj()), tol)

    @property
    def is_single_block(self) -> bool:
        return self.space.n_blocks == 1

    def matrix(self) -> np.ndarray:
        """Density on the whole Hilbert space (block diagonal)."""
        return self.density.dense()


@dataclass(frozen=True, eq=False)
class EntangledVector:
    """Vector in ``(+_l C^{m_l}) (x) (+_l C^{m_l})``, lexicographic ``((l,s),(l',s'))`` order."""

    space: FiniteQuantumSpace
    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=complex)
        if v.shape != (self.space.hilbert_dim ** 2,):
            raise DomainError(f"vector has shape {v.shape}, expected ({self.space.hilbert_dim ** 2},)")
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def maximally_entangled_vector(space: FiniteQuantumSpace) -> EntangledVector:
    """``(1/sqrt(N)) sum_l (1/sqrt(m_l)) sum_s f^l_s (x) f^l_s``."""
    h = space.hilbert_dim
    v = np.zeros(h * h, dtype=complex)
    for o, m in zip(space.offsets, space.blocks):
        s = o + np.arange(m)
        v[s * h + s] = 1.0 / np.sqrt(space.n_blocks * m)
    return EntangledVector(space, v)


def _tensor_hilbert_perm(a: FiniteQuantumSpace, b: FiniteQuantumSpace) -> np.ndarray:
    """Map Hilbert coordinates of ``tensor_space(a, b)`` to Kronecker coordinates of ``C^ha (x) C^hb``."""
    hb = b.hilbert_dim
    perm = []
    for oa, na in zip(a.offsets, a.blocks):
        for ob, nb in zip(b.offsets, b.blocks):
            for s in range(na):
                for t in range(nb):
                    perm.append((oa + s) * hb + ob + t)
    return np.asarray(perm, dtype=np.intp)


def act_on_vector(x: AlgebraElement, v, left: FiniteQuantumSpace,
                  right: FiniteQuantumSpace | None = None) -> np.ndarray:
    """Apply ``x`` in ``tensor_space(left, right)`` to ``v`` in ``C^{h_left} (x) C^{h_right}``.

    Each block pair ``(l, l')`` of the tensor algebra acts on the coordinate
    sub-block ``C^{m_l} (x) C^{m_l'}``.
    """
    right = left if right is None else right
    if x.space != tensor_space(left, right):
        raise DomainError(f"element lives on {x.space!r}, expected the tensor space of "
                          f"{left!r} and {right!r}")
    v = np.asarray(v, dtype=complex).reshape(-1)
    n = left.hilbert_dim * right.hilbert_dim
    if v.shape != (n,):
        raise DomainError(f"vector has length {v.size}, expected {n}")
    perm = _tensor_hilbert_perm(left, right)
    out = np.zeros(n, dtype=complex)
    out[perm] = x.dense() @ v[perm]
    return out
