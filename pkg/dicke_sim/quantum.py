"""
Complex linear algebra on truncated tensor-product Hilbert spaces.

Basis ordering is qubit A (x) qubit B (x) cavity, with |g> = index 0,
|e> = index 1 and Fock levels ascending. All values are immutable after
construction.
"""

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple, Union
import logging
import math
import string

import numpy as np

from .exceptions import DimensionError, NormError, ValidationError


logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
KET_NORM_TOL = 1e-10
TRACE_TOL = 1e-8
DM_HERMITIAN_TOL = 1e-10
MIN_EIGENVALUE = -1e-9


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    if arr.ndim != ndim:
        raise DimensionError(f"Expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_tag(dim: int, space_tag: Sequence[int]) -> Tuple[int, ...]:
    tag = tuple(int(d) for d in space_tag) if space_tag else (dim,)
    if any(d < 1 for d in tag) or math.prod(tag) != dim:
        raise DimensionError(f"space_tag {tag} does not factor dimension {dim}")
    return tag


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix acting on a tagged tensor-product space."""
    elements: np.ndarray
    space_tag: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        arr = _frozen_array(self.elements, 2)
        if arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"Operator must be square, got shape {arr.shape}")
        object.__setattr__(self, 'elements', arr)
        object.__setattr__(self, 'space_tag', _check_tag(arr.shape[0], self.space_tag))

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def dag(self) -> 'Operator':
        return Operator(self.elements.conj().T, self.space_tag)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.elements - self.elements.conj().T), initial=0.0) <= tol)

    def _check_compatible(self, other: 'Operator'):
        if self.space_tag != other.space_tag:
            raise DimensionError(f"Space mismatch: {self.space_tag} vs {other.space_tag}")

    def __add__(self, other: 'Operator') -> 'Operator':
        self._check_compatible(other)
        return Operator(self.elements + other.elements, self.space_tag)

    def __sub__(self, other: 'Operator') -> 'Operator':
        self._check_compatible(other)
        return Operator(self.elements - other.elements, self.space_tag)

    def __mul__(self, scalar: complex) -> 'Operator':
        return Operator(scalar * self.elements, self.space_tag)

    __rmul__ = __mul__

    def __matmul__(self, other: 'Operator') -> 'Operator':
        self._check_compatible(other)
        return Operator(self.elements @ other.elements, self.space_tag)


@dataclass(frozen=True, eq=False)
class Ket:
    """Pure state vector on a tagged tensor-product space."""
    amplitudes: np.ndarray
    space_tag: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        arr = _frozen_array(self.amplitudes, 1)
        object.__setattr__(self, 'amplitudes', arr)
        object.__setattr__(self, 'space_tag', _check_tag(arr.shape[0], self.space_tag))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> 'Ket':
        n = self.norm()
        if n == 0:
            raise NormError("Cannot normalize the zero vector")
        return Ket(self.amplitudes / n, self.space_tag)

    def check_norm(self, tol: float = KET_NORM_TOL) -> 'Ket':
        if abs(self.norm() - 1.0) > tol:
            raise NormError(f"Ket norm {self.norm():.12g} differs from 1 by more than {tol}")
        return self


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix on a tagged tensor-product space."""
    elements: np.ndarray
    space_tag: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        arr = _frozen_array(self.elements, 2)
        if arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"Density matrix must be square, got shape {arr.shape}")
        object.__setattr__(self, 'elements', arr)
        object.__setattr__(self, 'space_tag', _check_tag(arr.shape[0], self.space_tag))

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def purity(self) -> float:
        return float(np.real(np.einsum('ij,ji->', self.elements, self.elements)))

    def eigenvalues(self) -> np.ndarray:
        herm = 0.5 * (self.elements + self.elements.conj().T)
        return np.linalg.eigvalsh(herm)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])


State = Union[Ket, DensityMatrix]


def validate_density_matrix(rho: DensityMatrix, trace_tol: float = TRACE_TOL,
                            hermitian_tol: float = DM_HERMITIAN_TOL,
                            min_eigenvalue: float = MIN_EIGENVALUE) -> DensityMatrix:
    """
    Check the density-matrix invariants.

    Args:
        rho: Matrix to check
        trace_tol: Allowed deviation of the trace from 1
        hermitian_tol: Allowed max |rho - rho^dag| element
        min_eigenvalue: Lowest accepted eigenvalue

    Returns:
        The same matrix, for chaining
    """
    deviation = abs(rho.trace() - 1.0)
    if deviation > trace_tol:
        raise NormError(f"Density matrix trace deviates from 1 by {deviation:.3e}")
    skew = np.max(np.abs(rho.elements - rho.elements.conj().T), initial=0.0)
    if skew > hermitian_tol:
        raise ValidationError(f"Density matrix is not Hermitian (max skew {skew:.3e})")
    lowest = rho.min_eigenvalue()
    if lowest < min_eigenvalue:
        raise ValidationError(f"Density matrix has negative eigenvalue {lowest:.3e}")
    return rho


def destroy(n_max: int) -> Operator:
    """Truncated annihilation operator on Fock levels 0..n_max."""
    if int(n_max) != n_max or n_max < 1:
        raise ValidationError(f"n_max must be an integer >= 1, got {n_max}")
    n_max = int(n_max)
    data = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)
    return Operator(data, (n_max + 1,))


def identity(dims: Union[int, Sequence[int]]) -> Operator:
    tag = (int(dims),) if isinstance(dims, (int, np.integer)) else tuple(dims)
    return Operator(np.eye(math.prod(tag)), tag)


def sigma_minus() -> Operator:
    """Qubit lowering operator |g><e|."""
    return Operator([[0, 1], [0, 0]], (2,))


def sigma_plus() -> Operator:
    return sigma_minus().dag()


def sigma_z() -> Operator:
    """|e><e| - |g><g| in the (g, e) ordering."""
    return Operator([[-1, 0], [0, 1]], (2,))


def basis(dim: int, n: int) -> Ket:
    if not 0 <= n < dim:
        raise DimensionError(f"Basis index {n} outside dimension {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return Ket(amps, (dim,))


def dag(op: Operator) -> Operator:
    return op.dag()


def ket_to_dm(psi: Ket) -> DensityMatrix:
    return DensityMatrix(np.outer(psi.amplitudes, psi.amplitudes.conj()), psi.space_tag)


def tensor(*factors) -> Union[Operator, Ket, DensityMatrix]:
    """
    Kronecker product of the factors in listed order.

    Accepts either several arguments or a single list. All factors must
    be of one kind (Operator, Ket or DensityMatrix); the space tags are
    concatenated.
    """
    if len(factors) == 1 and isinstance(factors[0], (list, tuple)):
        factors = tuple(factors[0])
    if not factors:
        raise ValidationError("tensor needs at least one factor")

    kind = type(factors[0])
    if any(type(f) is not kind for f in factors):
        raise ValidationError("tensor factors must all be of the same kind")

    if kind is Ket:
        data = factors[0].amplitudes
        for f in factors[1:]:
            data = np.kron(data, f.amplitudes)
    else:
        data = factors[0].elements
        for f in factors[1:]:
            data = np.kron(data, f.elements)
    tag: List[int] = []
    for f in factors:
        tag.extend(f.space_tag)
    return kind(data, tuple(tag))


def embed(op: Operator, position: int, dims: Sequence[int]) -> Operator:
    """Place a single-subsystem operator at `position` of the product space `dims`."""
    if not 0 <= position < len(dims) or op.dim != dims[position]:
        raise DimensionError(f"Cannot embed a {op.dim}-level operator at slot {position} of {tuple(dims)}")
    factors = [identity(d) for d in dims]
    factors[position] = op
    return tensor(factors)


def partial_trace(rho: DensityMatrix, keep: Union[int, Iterable[int]]) -> DensityMatrix:
    """
    Trace out every subsystem except those in `keep`.

    Args:
        rho: Density matrix on a multi-partite space
        keep: Subsystem index, or indices, to keep

    Returns:
        Reduced density matrix on the kept subsystems, in ascending order
    """
    dims = list(rho.space_tag)
    n = len(dims)
    kept = sorted({int(keep)} if isinstance(keep, (int, np.integer)) else {int(k) for k in keep})
    if not kept or any(k < 0 or k >= n for k in kept):
        raise DimensionError(f"Invalid subsystem index {keep} for space {tuple(dims)}")
    if 2 * n > len(string.ascii_letters):
        raise DimensionError(f"Too many subsystems ({n}) for partial_trace")

    row = list(string.ascii_letters[:n])
    col = list(string.ascii_letters[n:2 * n])
    for i in range(n):
        if i not in kept:
            col[i] = row[i]
    out = ''.join(row[k] for k in kept) + ''.join(col[k] for k in kept)
    spec = ''.join(row) + ''.join(col) + '->' + out

    reduced = np.einsum(spec, rho.elements.reshape(dims + dims))
    kept_dims = [dims[k] for k in kept]
    size = math.prod(kept_dims)
    return DensityMatrix(reduced.reshape(size, size), tuple(kept_dims))


def expect(state: State, op: Operator) -> complex:
    """Tr(rho O) for density matrices, <psi|O|psi> for kets."""
    if state.dim != op.dim:
        raise DimensionError(f"State dimension {state.dim} does not match operator dimension {op.dim}")
    if isinstance(state, Ket):
        psi = state.amplitudes
        return complex(np.vdot(psi, op.elements @ psi))
    return complex(np.einsum('ij,ji->', state.elements, op.elements))
