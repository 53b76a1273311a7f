"""
Dense complex linear algebra for the Duality Tool.
Provides the state containers and the small set of matrix operations
(tensor products, partial traces, Hermitian eigendecomposition, norms)
used by the preparation, measurement and tomography modules.
"""
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from app.core.exceptions import DimensionError, InvalidStateError, NotHermitianError

# Tolerances on state invariants
STATE_TOL = 1e-12
HERMITIAN_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-10

SQRT_HALF = 1.0 / np.sqrt(2.0)

# Single-qubit polarization states; index 0 is H, index 1 is V
SINGLE_QUBIT_AMPLITUDES = {
    'H': (1.0, 0.0),
    'V': (0.0, 1.0),
    'D': (SQRT_HALF, SQRT_HALF),
    'A': (SQRT_HALF, -SQRT_HALF),
    'R': (SQRT_HALF, 1j * SQRT_HALF),
    'L': (SQRT_HALF, -1j * SQRT_HALF),
}

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _readonly(array):
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


def dagger(m):
    """Conjugate transpose of a matrix."""
    return np.conj(np.asarray(m)).T


def hermitize(m):
    """Return the Hermitian part (m + m†)/2."""
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m + dagger(m))


@dataclass(frozen=True)
class PureState:
    """Complex amplitude vector over a tensor-product polarization basis."""
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size == 0 or not np.all(np.isfinite(amplitudes)):
            raise InvalidStateError("Amplitudes must be a non-empty finite vector")
        object.__setattr__(self, 'amplitudes', _readonly(amplitudes))

    @property
    def dim(self):
        return self.amplitudes.size

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self):
        """Return the state rescaled to unit norm."""
        norm = self.norm()
        if norm == 0.0:
            raise InvalidStateError("Cannot normalize the zero vector")
        return PureState(self.amplitudes / norm)

    def inner(self, other):
        """⟨self|other⟩."""
        if other.dim != self.dim:
            raise DimensionError(f"Inner product of dims {self.dim} and {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_density(self):
        """Projector onto the normalized state."""
        amplitudes = self.normalize().amplitudes
        return DensityMatrix(np.outer(amplitudes, np.conj(amplitudes)))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
            raise DimensionError(f"Density matrix must be square, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise InvalidStateError("Density matrix has non-finite entries")
        if np.max(np.abs(matrix - dagger(matrix))) > STATE_TOL:
            raise InvalidStateError("Density matrix is not Hermitian")
        if abs(np.trace(matrix) - 1.0) > STATE_TOL:
            raise InvalidStateError(f"Density matrix trace is {np.trace(matrix).real:.15f}")
        if np.min(np.linalg.eigvalsh(hermitize(matrix))) < EIGENVALUE_FLOOR:
            raise InvalidStateError("Density matrix has negative eigenvalues")
        object.__setattr__(self, 'matrix', _readonly(matrix))

    @classmethod
    def from_operator(cls, m):
        """
        Build a density matrix from a computed positive operator.

        The operator is made exactly Hermitian and rescaled to unit trace,
        which absorbs rounding noise from products such as KρK†.

        Args:
            m (numpy.ndarray): Positive semidefinite operator with non-zero trace

        Returns:
            DensityMatrix: The normalized state
        """
        m = hermitize(m)
        trace = np.trace(m).real
        if trace <= 0.0:
            raise InvalidStateError("Operator has non-positive trace")
        return cls(m / trace)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def eigenvalues(self):
        return hermitian_eig(self.matrix)[0]


def ket(labels):
    """
    Build a product polarization state from basis labels.

    Args:
        labels (str): One letter per qubit from H, V, D, A, R, L, e.g. 'HV'

    Returns:
        PureState: Tensor product with the first letter most significant
    """
    state = None
    for label in labels:
        try:
            single = PureState(SINGLE_QUBIT_AMPLITUDES[label])
        except KeyError:
            raise InvalidStateError(f"Unknown polarization label '{label}'")
        state = single if state is None else tensor_product(state, single)
    if state is None:
        raise InvalidStateError("At least one polarization label is required")
    return state


def projector(state):
    """Rank-1 projector |ψ⟩⟨ψ| of a normalized PureState."""
    amplitudes = state.normalize().amplitudes
    return np.outer(amplitudes, np.conj(amplitudes))


def as_density(state):
    """Coerce a PureState, DensityMatrix or plain array into a DensityMatrix."""
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, PureState):
        return state.to_density()
    array = np.asarray(state, dtype=complex)
    if array.ndim == 1:
        return PureState(array).to_density()
    return DensityMatrix(array)


def tensor_product(a, b):
    """
    Kronecker product with the first factor on the most significant axis.

    Args:
        a: numpy matrix, PureState or DensityMatrix
        b: Operand of the same kind as ``a``

    Returns:
        Same kind as the operands, of dimension dim(a)·dim(b)
    """
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix.from_operator(np.kron(a.matrix, b.matrix))
    if isinstance(a, (PureState, DensityMatrix)) or isinstance(b, (PureState, DensityMatrix)):
        raise TypeError("tensor_product operands must be of the same kind")
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidStateError("tensor_product operands must be finite")
    return np.kron(a, b)


def partial_trace(rho, dims, keep='A'):
    """
    Trace out one factor of a bipartite state.

    Args:
        rho (DensityMatrix): State on a dA·dB dimensional space
        dims (tuple): (dA, dB)
        keep (str): 'A' keeps the first factor, 'B' the second

    Returns:
        DensityMatrix: Reduced state of the kept factor
    """
    d_a, d_b = (int(d) for d in dims)
    matrix = as_density(rho).matrix
    if matrix.shape != (d_a * d_b, d_a * d_b):
        raise DimensionError(f"State of dim {matrix.shape[0]} does not match dims {dims}")
    blocks = matrix.reshape(d_a, d_b, d_a, d_b)
    if keep == 'A':
        reduced = np.einsum('ijkj->ik', blocks)
    elif keep == 'B':
        reduced = np.einsum('ijil->jl', blocks)
    else:
        raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")
    return DensityMatrix.from_operator(reduced)


def hermitian_eig(m):
    """
    Eigendecomposition of a Hermitian matrix.

    Args:
        m (numpy.ndarray): Square matrix, Hermitian within 1e-10

    Returns:
        tuple: (eigenvalues in descending order, eigenvectors as orthonormal columns)
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {m.shape}")
    if m.size and np.max(np.abs(m - dagger(m))) > HERMITIAN_TOL:
        raise NotHermitianError("Matrix is not Hermitian within 1e-10")
    values, vectors = np.linalg.eigh(hermitize(m))
    return values[::-1], vectors[:, ::-1]


def trace_norm(m):
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    values, _ = hermitian_eig(m)
    return float(np.sum(np.abs(values)))


def psd_sqrt(m):
    """Principal square root of a positive semidefinite matrix."""
    values, vectors = hermitian_eig(m)
    roots = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * roots) @ dagger(vectors)


def psd_inv_sqrt(m, cutoff=1e-12):
    """
    Pseudo-inverse square root on the support of a PSD matrix.

    Eigenvalues below ``cutoff`` times the largest eigenvalue are treated
    as zero and left out of the inverse.
    """
    values, vectors = hermitian_eig(m)
    threshold = cutoff * max(float(np.max(values)), 0.0)
    inverse = np.zeros_like(values)
    support = values > threshold
    inverse[support] = 1.0 / np.sqrt(values[support])
    return (vectors * inverse) @ dagger(vectors)


def random_pure_state(dim, rng):
    """Haar-random pure state: the first column of a Haar-random unitary."""
    return PureState(random_unitary(dim, rng)[:, 0]).normalize()


def random_unitary(dim, rng):
    """Haar-random unitary drawn from a numpy Generator."""
    return unitary_group.rvs(dim, random_state=rng)
