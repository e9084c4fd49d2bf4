"""Dense operator algebra on truncated composite Hilbert spaces.

Subsystems are ordered ``[qubit(s)..., ancilla(s)..., oscillator]`` by every
builder in the package. All matrices are dense ``complex128`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, InvalidParameterError, InvalidTruncationError

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class HilbertSpace:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"invalid subsystem dimensions {self.dims!r}")
        object.__setattr__(self, "dims", dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.dims)


def _frozen(matrix) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Operator:
    """Square matrix tagged with the subsystem layout it acts on."""

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.space.size
        if m.shape != (n, n):
            raise DimensionError(f"matrix shape {m.shape} does not match space of size {n}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def of(cls, matrix, dims=None) -> "Operator":
        matrix = np.asarray(matrix)
        return cls(HilbertSpace(dims or (matrix.shape[0],)), matrix)

    @property
    def dims(self):
        return self.space.dims

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, rtol=HERMITIAN_RTOL) -> bool:
        scale = max(np.abs(self.matrix).max(), 1.0)
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() <= rtol * scale)

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise DimensionError(f"space mismatch: {self.dims} vs {other.dims}")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.space, scalar * self.matrix)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.space, self.matrix / scalar)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        return NotImplemented

    def __repr__(self):
        return f"Operator(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class State:
    """Density matrix on a composite space.

    Construction validates trace, Hermiticity and positivity at the package
    tolerances; pass ``check=False`` to skip validation for intermediate
    quantities that are known to be physical up to roundoff.
    """

    space: HilbertSpace
    rho: np.ndarray
    check: bool = True

    TRACE_TOL = 1e-9
    HERM_TOL = 1e-12
    POS_TOL = 1e-9

    def __post_init__(self):
        rho = _frozen(self.rho)
        n = self.space.size
        if rho.shape != (n, n):
            raise DimensionError(f"density matrix shape {rho.shape} does not match space of size {n}")
        object.__setattr__(self, "rho", rho)
        if self.check:
            tr = np.trace(rho)
            if abs(tr - 1) > self.TRACE_TOL:
                raise InvalidParameterError(f"trace {tr} differs from 1")
            if np.abs(rho - rho.conj().T).max() > self.HERM_TOL * max(1.0, np.abs(rho).max()):
                raise InvalidParameterError("density matrix is not Hermitian")
            if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -self.POS_TOL:
                raise InvalidParameterError("density matrix has negative eigenvalues")

    @property
    def dims(self):
        return self.space.dims

    @classmethod
    def from_ket(cls, ket, dims=None) -> "State":
        ket = np.asarray(ket, dtype=complex).ravel()
        ket = ket / np.linalg.norm(ket)
        return cls(HilbertSpace(dims or (ket.size,)), np.outer(ket, ket.conj()))

    def __repr__(self):
        return f"State(dims={self.dims})"


def identity(n: int) -> Operator:
    return Operator(HilbertSpace((n,)), np.eye(n))


def fock_destroy(n_trunc: int) -> Operator:
    """Annihilation operator on the Fock states ``|0>, ..., |n_trunc-1>``."""
    if int(n_trunc) != n_trunc or n_trunc < 2:
        raise InvalidTruncationError(f"Fock truncation must be an integer >= 2, got {n_trunc}")
    n = int(n_trunc)
    return Operator(HilbertSpace((n,)), np.diag(np.sqrt(np.arange(1, n)), 1))


_PAULI = {
    "x": [[0, 1], [1, 0]],
    "y": [[0, -1j], [1j, 0]],
    "z": [[1, 0], [0, -1]],
    "plus": [[0, 1], [0, 0]],
    "minus": [[0, 0], [1, 0]],
}


def pauli(axis: str) -> Operator:
    """Pauli or ladder matrix; index 0 is the sigma_z = +1 ("up") state."""
    try:
        return Operator(HilbertSpace((2,)), np.array(_PAULI[axis], dtype=complex))
    except KeyError:
        raise InvalidParameterError(f"unknown Pauli axis {axis!r}") from None


def tensor(ops: Sequence[Operator]) -> Operator:
    ops = list(ops)
    if not ops:
        raise InvalidParameterError("tensor() needs at least one operator")
    dims = tuple(d for op in ops for d in op.dims)
    return Operator(HilbertSpace(dims), reduce(np.kron, (op.matrix for op in ops)))


def embed(op: Operator, index: int, dims: Sequence[int]) -> Operator:
    """Place a single-subsystem operator at ``index`` of a composite space."""
    dims = tuple(dims)
    if not 0 <= index < len(dims):
        raise DimensionError(f"subsystem index {index} out of range for dims {dims}")
    if op.space.size != dims[index]:
        raise DimensionError(f"operator of size {op.space.size} cannot act on subsystem of size {dims[index]}")
    parts = [identity(d) for d in dims]
    parts[index] = op
    return tensor(parts)


def reduce_matrix(rho: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Partial trace of a raw matrix; kept subsystems stay in ascending order."""
    dims = tuple(dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise DimensionError("keep must name at least one subsystem")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise DimensionError(f"subsystem index out of range for dims {dims}")
    n = len(dims)
    t = np.asarray(rho).reshape(dims + dims)
    # einsum labels: row indices 0..n-1, column indices n..2n-1; traced ones share a label
    row = list(range(n))
    col = [i if i not in keep else n + i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    reduced = np.einsum(t, row + col, out)
    k = int(np.prod([dims[i] for i in keep]))
    return reduced.reshape(k, k)


def partial_trace(state: State, keep: Iterable[int]) -> State:
    keep = sorted(set(int(k) for k in keep))
    rho = reduce_matrix(state.rho, state.dims, keep)
    return State(HilbertSpace(tuple(state.dims[i] for i in keep)), rho, check=False)


def thermal_populations(n_trunc: int, n_th: float) -> np.ndarray:
    if n_th < 0:
        raise InvalidParameterError(f"thermal occupation must be >= 0, got {n_th}")
    if int(n_trunc) != n_trunc or n_trunc < 2:
        raise InvalidTruncationError(f"Fock truncation must be an integer >= 2, got {n_trunc}")
    p = np.zeros(int(n_trunc))
    if n_th == 0:
        p[0] = 1.0
        return p
    ratio = n_th / (n_th + 1.0)
    p = ratio ** np.arange(int(n_trunc))
    return p / p.sum()


def thermal_state(n_trunc: int, n_th: float) -> State:
    """Bose-Einstein state renormalized over the truncated Fock space."""
    p = thermal_populations(n_trunc, n_th)
    return State(HilbertSpace((int(n_trunc),)), np.diag(p))


def product_state(states: Sequence[State]) -> State:
    dims = tuple(d for s in states for d in s.dims)
    return State(HilbertSpace(dims), reduce(np.kron, (s.rho for s in states)), check=False)


def expect(op: Operator, state: State) -> complex:
    if op.space != state.space:
        raise DimensionError(f"space mismatch: operator {op.dims} vs state {state.dims}")
    return complex(np.trace(op.matrix @ state.rho))
