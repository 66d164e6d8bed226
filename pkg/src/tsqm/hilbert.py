"""Dense finite-dimensional Hilbert space: kets, operators, projectors.

Values are immutable: every constructor copies its input into a read-only
complex128 array and checks the defining invariants eagerly, raising
rather than repairing.  Tensor products use first-factor-major ordering,
i.e. ``(u ⊗ v)[i * v.dim + j] = u[i] * v[j]``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .config import TOL
from .errors import DimensionMismatch, InvariantViolation, ZeroVector


def _frozen(data, ndim: int) -> np.ndarray:
    arr = np.array(data, dtype=np.complex128)
    if arr.ndim != ndim:
        raise InvariantViolation("shape", f"expected {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvariantViolation("finite", "entries must be finite")
    arr.setflags(write=False)
    return arr


class StateVector:
    """A ket of complex amplitudes; not necessarily normalized."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes: Iterable[complex]):
        arr = _frozen(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes, 1)
        if arr.size < 1:
            raise InvariantViolation("dim", "a state needs at least one amplitude")
        self.amplitudes = arr

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = TOL.normalized_input) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def scaled(self, factor: complex) -> "StateVector":
        return StateVector(self.amplitudes * factor)

    def __add__(self, other: "StateVector") -> "StateVector":
        _check_dims(self.dim, other.dim)
        return StateVector(self.amplitudes + other.amplitudes)

    def __len__(self) -> int:
        return self.dim

    def __iter__(self):
        return iter(self.amplitudes)

    def __repr__(self) -> str:
        return f"StateVector({np.array2string(self.amplitudes, precision=6)})"

    def allclose(self, other: "StateVector", atol: float = TOL.unit_norm) -> bool:
        return self.dim == other.dim and np.allclose(self.amplitudes, other.amplitudes, rtol=0, atol=atol)


class Operator:
    """Square complex matrix acting on kets of the same dimension."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        arr = _frozen(matrix, 2)
        if arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise InvariantViolation("square", f"shape {arr.shape}")
        self.matrix = arr
        self._validate()

    def _validate(self) -> None:
        pass

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def adjoint(self) -> "Operator":
        return Operator(self.matrix.conj().T)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return apply(self, other)
        if isinstance(other, Operator):
            _check_dims(self.dim, other.dim)
            return Operator(self.matrix @ other.matrix)
        return NotImplemented

    def __add__(self, other: "Operator") -> "Operator":
        _check_dims(self.dim, other.dim)
        return Operator(self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_dims(self.dim, other.dim)
        return Operator(self.matrix - other.matrix)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"

    def allclose(self, other: "Operator", atol: float = TOL.operator) -> bool:
        return self.dim == other.dim and _maxabs(self.matrix - other.matrix) <= atol


class Projector(Operator):
    """Hermitian idempotent operator: the subspace of one alternative."""

    __slots__ = ()

    def _validate(self) -> None:
        m = self.matrix
        herm = _maxabs(m - m.conj().T)
        if herm > TOL.operator:
            raise InvariantViolation("hermitian", f"max |P - P^dagger| = {herm:.3g}")
        idem = _maxabs(m @ m - m)
        if idem > TOL.operator:
            raise InvariantViolation("idempotent", f"max |P P - P| = {idem:.3g}")

    def rank(self) -> int:
        return int(round(trace(self).real))

    def adjoint(self) -> "Projector":
        return self


class UnitaryOperator(Operator):
    __slots__ = ()

    def _validate(self) -> None:
        m = self.matrix
        dev = _maxabs(m.conj().T @ m - np.eye(self.dim))
        if dev > TOL.operator:
            raise InvariantViolation("unitary", f"max |U^dagger U - I| = {dev:.3g}")

    def adjoint(self) -> "UnitaryOperator":
        return UnitaryOperator(self.matrix.conj().T)

    def __matmul__(self, other):
        out = super().__matmul__(other)
        if isinstance(other, UnitaryOperator):
            return UnitaryOperator(out.matrix)
        return out


class DensityOperator(Operator):
    """Self-adjoint positive operator with unit trace and W² ≤ W."""

    __slots__ = ()

    def _validate(self) -> None:
        m = self.matrix
        tol = TOL.operator
        herm = _maxabs(m - m.conj().T)
        if herm > tol:
            raise InvariantViolation("hermitian", f"max |W - W^dagger| = {herm:.3g}")
        tr = np.trace(m)
        if abs(tr - 1.0) > tol:
            raise InvariantViolation("unit-trace", f"Tr W = {tr:.12g}")
        h = (m + m.conj().T) / 2
        ev = np.linalg.eigvalsh(h)
        if ev.min() < -tol or ev.max() > 1 + tol:
            raise InvariantViolation("spectrum", f"eigenvalues in [{ev.min():.3g}, {ev.max():.3g}]")
        ev2 = np.linalg.eigvalsh(h - h @ h)
        if ev2.min() < -tol:
            raise InvariantViolation("W^2<=W", f"min eigenvalue of W - W^2 = {ev2.min():.3g}")

    def is_pure(self, tol: float = TOL.operator) -> bool:
        m = self.matrix
        return _maxabs(m @ m - m) <= tol


# -- operations ---------------------------------------------------------------

def inner(u: StateVector, v: StateVector) -> complex:
    """``<u|v>``, conjugate-linear in ``u``."""
    _check_dims(u.dim, v.dim)
    return complex(np.vdot(u.amplitudes, v.amplitudes))


def normalize(v: StateVector) -> StateVector:
    n = v.norm()
    if n < TOL.zero_norm:
        raise ZeroVector(f"cannot normalize a vector of norm {n:.3g}")
    return StateVector(v.amplitudes / n)


def apply(op: Operator, v: StateVector) -> StateVector:
    """Matrix-vector product; the result is not renormalized."""
    _check_dims(op.dim, v.dim)
    return StateVector(op.matrix @ v.amplitudes)


def tensor(u: StateVector, v: StateVector) -> StateVector:
    return StateVector(np.kron(u.amplitudes, v.amplitudes))


def tensor_operator(a: Operator, b: Operator) -> Operator:
    """Kronecker product, keeping the refinement when both factors share it."""
    m = np.kron(a.matrix, b.matrix)
    for cls in (Projector, UnitaryOperator, DensityOperator):
        if isinstance(a, cls) and isinstance(b, cls):
            return cls(m)
    return Operator(m)


def trace(op: Operator) -> complex:
    return complex(np.trace(op.matrix))


# -- constructors -------------------------------------------------------------

def ket(*amplitudes: complex, normalized: bool = True) -> StateVector:
    """Build a ket from amplitudes, normalizing by default: ``ket(1, 1, -1)``."""
    v = StateVector(amplitudes)
    return normalize(v) if normalized else v


def basis(dim: int, index: int) -> StateVector:
    e = np.zeros(dim, dtype=np.complex128)
    e[index] = 1.0
    return StateVector(e)


def identity(dim: int) -> UnitaryOperator:
    return UnitaryOperator(np.eye(dim))


def zero_operator(dim: int) -> Operator:
    return Operator(np.zeros((dim, dim)))


def projector_onto(v: StateVector) -> Projector:
    """Rank-1 projector ``|v><v|`` onto the ray of ``v``."""
    a = normalize(v).amplitudes
    return Projector(np.outer(a, a.conj()))


def span_projector(vectors: Sequence[StateVector]) -> Projector:
    """Projector onto the span of the given (not necessarily orthogonal) kets."""
    if not vectors:
        raise ValueError("need at least one vector")
    mat = np.column_stack([v.amplitudes for v in vectors])
    q, r = np.linalg.qr(mat)
    keep = np.abs(np.diag(r)) > TOL.zero_norm
    q = q[:, keep]
    return Projector(q @ q.conj().T)


def subspace_projector(dim: int, indices: Iterable[int]) -> Projector:
    """Diagonal projector onto the span of the listed computational basis states."""
    d = np.zeros(dim)
    for i in indices:
        if not 0 <= i < dim:
            raise InvariantViolation("basis-index", f"index {i} outside 0..{dim - 1}")
        d[i] = 1.0
    return Projector(np.diag(d))


def pure_density(v: StateVector) -> DensityOperator:
    return DensityOperator(projector_onto(v).matrix)


def maximally_mixed(dim: int) -> DensityOperator:
    return DensityOperator(np.eye(dim) / dim)


def random_state(rng: np.random.Generator, dim: int) -> StateVector:
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return normalize(StateVector(z))


def random_unitary(rng: np.random.Generator, dim: int) -> UnitaryOperator:
    """Haar-distributed unitary via QR of a Ginibre matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return UnitaryOperator(q * ph)


def _maxabs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatch(f"dimension {a} does not match {b}")
