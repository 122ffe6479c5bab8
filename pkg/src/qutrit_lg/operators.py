"""
Dense quantum primitives: density operators, unitaries and Kraus channels

All values are immutable after construction; array fields are copied and
flagged read-only. Index convention for tensor products is left-major
(the left factor owns the slow index).
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import KW_ONLY, dataclass
from functools import reduce
from typing import Self, overload

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import config

logger = logging.getLogger(__name__)

Matrix = NDArray[np.complex128]


class ContractViolation(ValueError):
    pass


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ContractViolation(msg)


def _frozen(matrix: ArrayLike) -> Matrix:
    array = np.array(matrix, dtype=np.complex128)
    array.setflags(write=False)
    return array


def _square(matrix: Matrix, what: str) -> int:
    _require(matrix.ndim == 2 and matrix.shape[0] == matrix.shape[1], f"{what} must be a square matrix")
    _require(matrix.shape[0] > 0, f"{what} must not be empty")
    return matrix.shape[0]


def _hermitian_part(matrix: Matrix) -> Matrix:
    return (matrix + matrix.conj().T) / 2


def dagger(matrix: Matrix) -> Matrix:
    return matrix.conj().T


@dataclass(frozen=True, slots=True)
class DensityOperator:
    matrix: Matrix
    _: KW_ONLY
    # trace of the operator, < 1 for post-selected states
    norm: float = 1.0

    def __post_init__(self) -> None:
        matrix = _frozen(self.matrix)
        object.__setattr__(self, "matrix", matrix)
        _square(matrix, "density operator")

        tol = config.STRUCTURAL_TOL
        _require(
            float(np.max(np.abs(matrix - dagger(matrix)))) <= tol,
            "density operator is not Hermitian",
        )
        trace = float(np.trace(matrix).real)
        _require(abs(trace - self.norm) <= tol, f"trace {trace:.12g} does not match norm {self.norm:.12g}")
        _require(-tol <= self.norm <= 1 + tol, f"norm {self.norm:.12g} outside [0, 1]")
        lowest = float(np.linalg.eigvalsh(matrix)[0])
        _require(lowest >= -config.POSITIVITY_TOL, f"density operator has eigenvalue {lowest:.3g} < 0")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, matrix: ArrayLike) -> Self:
        """Wrap a (possibly sub-normalized) matrix, taking its trace as norm."""
        array = _hermitian_part(np.asarray(matrix, dtype=np.complex128))
        return cls(array, norm=float(np.trace(array).real))

    @classmethod
    def pure(cls, ket: ArrayLike) -> Self:
        vector = np.asarray(ket, dtype=np.complex128).reshape(-1)
        length = float(np.linalg.norm(vector))
        _require(length > 0, "ket must not be the zero vector")
        vector = vector / length
        return cls(np.outer(vector, vector.conj()))

    @classmethod
    def basis(cls, dim: int, index: int) -> Self:
        _require(0 <= index < dim, f"basis index {index} outside 0..{dim - 1}")
        matrix = np.zeros((dim, dim), dtype=np.complex128)
        matrix[index, index] = 1
        return cls(matrix)

    @classmethod
    def maximally_mixed(cls, dim: int) -> Self:
        _require(dim > 0, "dimension must be positive")
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    def normalized(self) -> Self:
        _require(self.norm > 0, "cannot renormalize a state with zero trace")
        return type(self)(self.matrix / self.norm)

    def scaled(self, weight: float) -> Self:
        _require(0 <= weight * self.norm <= 1 + config.STRUCTURAL_TOL, f"weight {weight} breaks norm bound")
        return type(self)(self.matrix * weight, norm=self.norm * weight)

    def __add__(self, other: Self) -> Self:
        _require(self.dim == other.dim, f"dimension mismatch {self.dim} != {other.dim}")
        return type(self)(self.matrix + other.matrix, norm=self.norm + other.norm)


@dataclass(frozen=True, slots=True)
class UnitaryOperator:
    matrix: Matrix

    def __post_init__(self) -> None:
        matrix = _frozen(self.matrix)
        object.__setattr__(self, "matrix", matrix)
        dim = _square(matrix, "unitary")
        deviation = float(np.max(np.abs(matrix @ dagger(matrix) - np.eye(dim))))
        _require(deviation <= config.STRUCTURAL_TOL, f"operator is not unitary (deviation {deviation:.3g})")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, dim: int) -> Self:
        return cls(np.eye(dim, dtype=np.complex128))

    def __matmul__(self, other: Self) -> Self:
        _require(self.dim == other.dim, f"dimension mismatch {self.dim} != {other.dim}")
        return type(self)(self.matrix @ other.matrix)

    def conjugate(self, rho: DensityOperator) -> DensityOperator:
        _require(self.dim == rho.dim, f"dimension mismatch {self.dim} != {rho.dim}")
        matrix = _hermitian_part(self.matrix @ rho.matrix @ dagger(self.matrix))
        return DensityOperator(matrix, norm=rho.norm)

    def as_channel(self) -> KrausChannel:
        return KrausChannel((self.matrix,), complete=True)


@dataclass(frozen=True, slots=True)
class KrausChannel:
    operators: tuple[Matrix, ...]
    _: KW_ONLY
    complete: bool = True

    def __post_init__(self) -> None:
        operators = tuple(_frozen(k) for k in self.operators)
        object.__setattr__(self, "operators", operators)
        _require(bool(operators), "a channel needs at least one Kraus operator")
        shape = operators[0].shape
        _require(len(shape) == 2, "Kraus operators must be matrices")
        _require(all(k.shape == shape for k in operators), "Kraus operators must share one shape")

        tol = config.STRUCTURAL_TOL
        for k in operators:
            largest = float(np.linalg.eigvalsh(dagger(k) @ k)[-1])
            _require(largest <= 1 + tol, f"Kraus operator violates K^dagger K <= 1 ({largest:.12g})")
        if self.complete:
            error = self.completeness_error()
            _require(error <= tol, f"channel is not trace preserving (deviation {error:.3g})")

    @property
    def dim_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.operators[0].shape[0]

    @classmethod
    def identity(cls, dim: int) -> Self:
        return cls((np.eye(dim, dtype=np.complex128),), complete=True)

    @classmethod
    def from_subchannels(cls, subchannels: Iterable[KrausChannel], *, complete: bool) -> Self:
        """Sum of subchannels, i.e. the union of their Kraus operators."""
        operators = tuple(k for channel in subchannels for k in channel.operators)
        return cls(operators, complete=complete)

    def completeness_error(self) -> float:
        total = sum(dagger(k) @ k for k in self.operators)
        return float(np.max(np.abs(total - np.eye(self.dim_in))))

    def compose(self, other: KrausChannel) -> KrausChannel:
        """Apply ``self`` first, then ``other``."""
        _require(other.dim_in == self.dim_out, f"dimension mismatch {self.dim_out} -> {other.dim_in}")
        operators = tuple(b @ a for b in other.operators for a in self.operators)
        return KrausChannel(operators, complete=self.complete and other.complete)


@overload
def tensor_product(a: DensityOperator, b: DensityOperator) -> DensityOperator: ...
@overload
def tensor_product(a: UnitaryOperator, b: UnitaryOperator) -> UnitaryOperator: ...
@overload
def tensor_product(a: KrausChannel, b: KrausChannel) -> KrausChannel: ...
def tensor_product(a, b):
    match a, b:
        case DensityOperator(), DensityOperator():
            return DensityOperator(np.kron(a.matrix, b.matrix), norm=a.norm * b.norm)
        case UnitaryOperator(), UnitaryOperator():
            return UnitaryOperator(np.kron(a.matrix, b.matrix))
        case KrausChannel(), KrausChannel():
            operators = tuple(np.kron(ka, kb) for ka in a.operators for kb in b.operators)
            return KrausChannel(operators, complete=a.complete and b.complete)
    raise ContractViolation(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def tensor_all[T: (DensityOperator, UnitaryOperator, KrausChannel)](factors: Sequence[T]) -> T:
    _require(bool(factors), "nothing to tensor")
    return reduce(tensor_product, factors)


def partial_trace(rho: DensityOperator, keep: int | Iterable[int], dims: Sequence[int]) -> DensityOperator:
    """Trace out every factor of ``dims`` not listed in ``keep``; kept factors stay in order."""
    dims = tuple(dims)
    _require(all(d > 0 for d in dims), f"invalid factor dimensions {dims}")
    _require(int(np.prod(dims)) == rho.dim, f"factor dimensions {dims} do not multiply to {rho.dim}")
    kept = {keep} if isinstance(keep, int) else set(keep)
    _require(kept <= set(range(len(dims))), f"kept factors {sorted(kept)} outside 0..{len(dims) - 1}")

    tensor = rho.matrix.reshape(dims * 2)
    for axis in sorted(set(range(len(dims))) - kept, reverse=True):
        tensor = np.trace(tensor, axis1=axis, axis2=axis + tensor.ndim // 2)
    dim = int(np.prod([dims[i] for i in sorted(kept)]))
    return DensityOperator(_hermitian_part(tensor.reshape(dim, dim)), norm=rho.norm)


def apply_channel(rho: DensityOperator, channel: KrausChannel) -> DensityOperator:
    """Return sum K rho K^dagger; its ``norm`` is the retained probability."""
    _require(channel.dim_in == rho.dim, f"channel expects dimension {channel.dim_in}, got {rho.dim}")
    result = sum(k @ rho.matrix @ dagger(k) for k in channel.operators)
    return DensityOperator.from_matrix(result)


def diagonal_populations(rho: DensityOperator) -> NDArray[np.float64]:
    populations = np.diagonal(rho.matrix).real.copy()
    floor = -config.POSITIVITY_TOL
    _require(bool(np.all(populations >= floor)), "negative population in density operator")
    _require(bool(np.all(populations <= 1 - floor)), "population above one in density operator")
    return np.clip(populations, 0.0, 1.0)


def purity(rho: DensityOperator) -> float:
    _require(rho.norm > 0, "purity of a zero state is undefined")
    return float(np.trace(rho.matrix @ rho.matrix).real) / rho.norm**2


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    _require(a.dim == b.dim, f"dimension mismatch {a.dim} != {b.dim}")
    return float(np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix)))) / 2
