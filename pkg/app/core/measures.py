"""
Coherence and state-quality measures for the Duality Tool.
Covers the wave side of the duality (l1-norm coherence of the path state)
and the figures used to characterize the source: concurrence, purity,
visibility and fidelity.
"""
from dataclasses import dataclass

import numpy as np

from app.core.exceptions import DimensionError, InvalidStateError
from app.core.qmath import (
    PAULI_Y,
    SINGLE_QUBIT_AMPLITUDES,
    PureState,
    as_density,
    hermitian_eig,
    hermitize,
    partial_trace,
    projector,
    psd_sqrt,
)

# First and second element of each analyzer basis
VISIBILITY_BASES = {
    'HV': ('H', 'V'),
    'DA': ('D', 'A'),
    'RL': ('R', 'L'),
}

SIGMA_YY = np.kron(PAULI_Y, PAULI_Y)

# Eigenvalues below this are rounding noise before the square root
EIGENVALUE_NOISE = 1e-13


@dataclass(frozen=True)
class CoherenceReport:
    c_l1: float
    c_normalized: float
    n_paths: int


def _state_matrix(state):
    # PreparedState carries its density matrix in .state
    return as_density(getattr(state, 'state', state))


def l1_coherence(rho):
    """Sum of the absolute off-diagonal entries, Σ_{i≠j} |ρ_ij|."""
    matrix = as_density(rho).matrix
    return float(np.sum(np.abs(matrix)) - np.sum(np.abs(np.diag(matrix))))


def path_coherence(state, n_paths=2):
    """
    Normalized coherence C = C_l1(ρ_path)/N of the path (target) system.

    Args:
        state: PreparedState, PureState or DensityMatrix with the path index first
        n_paths (int): Number of paths N

    Returns:
        CoherenceReport: Raw and normalized coherence
    """
    rho = _state_matrix(state)
    if n_paths < 2 or rho.dim % n_paths:
        raise DimensionError(f"State dim {rho.dim} is not divisible by {n_paths} paths")
    reduced = partial_trace(rho, (n_paths, rho.dim // n_paths), keep='A')
    c_l1 = l1_coherence(reduced)
    return CoherenceReport(c_l1=c_l1, c_normalized=c_l1 / n_paths, n_paths=int(n_paths))


def concurrence(rho):
    """
    Wootters concurrence of a two-qubit state.

    The λ_i are square roots of the eigenvalues of √ρ·ρ̃·√ρ with
    ρ̃ = (σy⊗σy)ρ*(σy⊗σy), which share the spectrum of ρρ̃.

    Args:
        rho (DensityMatrix): Two-qubit state

    Returns:
        float: max(0, λ1 − λ2 − λ3 − λ4)
    """
    matrix = _state_matrix(rho).matrix
    if matrix.shape != (4, 4):
        raise DimensionError(f"Concurrence needs a two-qubit state, got dim {matrix.shape[0]}")
    spin_flipped = SIGMA_YY @ np.conj(matrix) @ SIGMA_YY
    root = psd_sqrt(matrix)
    values, _ = hermitian_eig(hermitize(root @ spin_flipped @ root))
    lambdas = np.sqrt(np.where(values > EIGENVALUE_NOISE, values, 0.0))
    return float(max(0.0, lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]))


def purity(rho):
    """Tr(ρ²)."""
    matrix = _state_matrix(rho).matrix
    return float(np.real(np.trace(matrix @ matrix)))


def visibility(rho, basis='HV'):
    """
    Coincidence contrast of a two-qubit state in one analyzer basis.

    Qubit 1 is projected on the first element of the basis while the qubit 2
    analyzer switches between both elements; the contrast of the two
    coincidence rates is returned.

    Args:
        rho (DensityMatrix): Two-qubit state
        basis (str): 'HV', 'DA' or 'RL'

    Returns:
        float: (max − min)/(max + min), or 0 when no coincidences remain
    """
    matrix = _state_matrix(rho).matrix
    if matrix.shape != (4, 4):
        raise DimensionError(f"Visibility needs a two-qubit state, got dim {matrix.shape[0]}")
    try:
        first, second = VISIBILITY_BASES[basis]
    except KeyError:
        raise ValueError(f"Unknown visibility basis '{basis}'")
    fixed = projector(PureState(SINGLE_QUBIT_AMPLITUDES[first]))
    rates = []
    for label in (first, second):
        analyzer = projector(PureState(SINGLE_QUBIT_AMPLITUDES[label]))
        rates.append(max(0.0, float(np.real(np.trace(np.kron(fixed, analyzer) @ matrix)))))
    total = max(rates) + min(rates)
    if total <= 0.0:
        return 0.0
    return (max(rates) - min(rates)) / total


def fidelity(a, b):
    """
    Uhlmann fidelity (Tr√(√a·b·√a))².

    Args:
        a (DensityMatrix): First state
        b (DensityMatrix): Second state of equal dimension

    Returns:
        float: Fidelity in [0, 1]
    """
    a = _state_matrix(a).matrix
    b = _state_matrix(b).matrix
    if a.shape != b.shape:
        raise DimensionError(f"Fidelity of states with shapes {a.shape} and {b.shape}")
    root = psd_sqrt(a)
    values, _ = hermitian_eig(hermitize(root @ b @ root))
    value = float(np.sum(np.sqrt(np.where(values > EIGENVALUE_NOISE, values, 0.0))) ** 2)
    return min(max(value, 0.0), 1.0)


def noise_weight_for_purity(target_purity):
    """
    White-noise weight w giving a noisy two-qubit pure state the requested purity.

    Inverts Tr(ρ²) = 1/4 + 3/4·(1 − w)².
    """
    if not 0.25 <= target_purity <= 1.0:
        raise InvalidStateError(f"Two-qubit purity must lie in [0.25, 1], got {target_purity}")
    return float(1.0 - np.sqrt((target_purity - 0.25) / 0.75))


def closed_form_concurrence(a, b):
    """Concurrence 2ab/(a² + b²) of the singlet after detector loss with amplitudes (a, b)."""
    if a == 0.0 and b == 0.0:
        raise InvalidStateError("Both amplitudes are zero")
    return float(2.0 * a * b / (a ** 2 + b ** 2))
