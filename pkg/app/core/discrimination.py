"""
Minimum-error discrimination for the Duality Tool.
The particle side of the duality: detector ensembles, Helstrom and POVM
success probabilities, the iterative POVM optimizer for more than two
paths and the coherence / path-information duality point.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from app.config.settings import DEFAULT_POVM_MAX_ITERS, DEFAULT_POVM_TOL
from app.core.exceptions import (
    DimensionError,
    DualityViolationError,
    HypothesisCountError,
    InvalidPovmError,
    PriorError,
)
from app.core.measures import path_coherence
from app.core.qmath import (
    HERMITIAN_TOL,
    DensityMatrix,
    as_density,
    hermitian_eig,
    hermitize,
    psd_inv_sqrt,
    trace_norm,
)

logger = logging.getLogger(__name__)

PRIOR_TOL = 1e-10
ZERO_PRIOR = 1e-12
PSD_FLOOR = -1e-10
COMPLETENESS_TOL = 1e-9
DUALITY_SLACK = 1e-9
# Eigenvalues of p1ρ1 − p2ρ2 above this go to Π1, so exact ties land there
HELSTROM_TIE_TOL = 1e-12
SUPPORT_CUTOFF = 1e-10


@dataclass(frozen=True)
class DetectorEnsemble:
    """Priors p_i and conditional detector states ρ_i, with ρ_det = Σ p_i ρ_i."""
    priors: np.ndarray
    states: tuple
    zero_prior: tuple = ()

    def __post_init__(self):
        priors = np.array(self.priors, dtype=float)
        if np.any(priors < 0.0) or abs(priors.sum() - 1.0) > PRIOR_TOL:
            raise PriorError(f"Ensemble priors must be a probability vector, got {priors.tolist()}")
        states = tuple(as_density(s) for s in self.states)
        if len(states) != priors.size:
            raise DimensionError(f"{priors.size} priors but {len(states)} states")
        if len({s.dim for s in states}) != 1:
            raise DimensionError("Detector states have mixed dimensions")
        zero_prior = tuple(self.zero_prior) or tuple(bool(p < ZERO_PRIOR) for p in priors)
        priors.setflags(write=False)
        object.__setattr__(self, 'priors', priors)
        object.__setattr__(self, 'states', states)
        object.__setattr__(self, 'zero_prior', zero_prior)

    @property
    def n_hypotheses(self):
        return len(self.states)

    @property
    def dim(self):
        return self.states[0].dim

    def weighted_states(self):
        """The operators p_i ρ_i."""
        return [p * s.matrix for p, s in zip(self.priors, self.states)]

    def average_state(self):
        return sum(self.weighted_states())


@dataclass(frozen=True)
class PovmSet:
    """Positive operators summing to the identity."""
    elements: tuple

    def __post_init__(self):
        elements = tuple(np.array(e, dtype=complex) for e in self.elements)
        if not elements:
            raise InvalidPovmError("A POVM needs at least one element")
        shape = elements[0].shape
        if len(shape) != 2 or shape[0] != shape[1] or any(e.shape != shape for e in elements):
            raise DimensionError("POVM elements must be square matrices of one size")
        for index, element in enumerate(elements):
            if np.max(np.abs(element - np.conj(element).T)) > HERMITIAN_TOL:
                raise InvalidPovmError(f"POVM element {index} is not Hermitian")
            values, _ = hermitian_eig(element)
            if values[-1] < PSD_FLOOR:
                raise InvalidPovmError(f"POVM element {index} has eigenvalue {values[-1]:.3e}")
        deviation = np.max(np.abs(sum(elements) - np.eye(shape[0])))
        if deviation > COMPLETENESS_TOL:
            raise InvalidPovmError(f"POVM elements deviate from the identity by {deviation:.3e}")
        for element in elements:
            element.setflags(write=False)
        object.__setattr__(self, 'elements', elements)

    def __len__(self):
        return len(self.elements)

    @property
    def dim(self):
        return self.elements[0].shape[0]


@dataclass(frozen=True)
class DualityPoint:
    zeta: float
    coherence: float
    path_info: float
    p_success: float
    sum_of_squares: float
    n_paths: int = 2


class PovmOptimization(NamedTuple):
    povm: PovmSet
    p_success: float
    converged: bool
    iterations: int


def extract_ensemble(state, n_paths=2, detector_dim=None):
    """
    Split a path⊗detector state into its detector ensemble.

    p_i = Tr⟨i|ρ|i⟩ and ρ_i = ⟨i|ρ|i⟩/p_i, where ⟨i|·|i⟩ acts on the path
    factor. Branches with vanishing prior carry I/d and are flagged.

    Args:
        state: PreparedState, PureState or DensityMatrix with the path index first
        n_paths (int): Number of paths N
        detector_dim (int, optional): Detector dimension d, dim/N by default

    Returns:
        DetectorEnsemble: The N conditional detector states with their priors
    """
    rho = as_density(getattr(state, 'state', state))
    if detector_dim is None:
        detector_dim = rho.dim // n_paths
    if n_paths * detector_dim != rho.dim:
        raise DimensionError(f"State dim {rho.dim} != {n_paths} paths x {detector_dim}")
    blocks = rho.matrix.reshape(n_paths, detector_dim, n_paths, detector_dim)
    priors, states, zero_prior = [], [], []
    for i in range(n_paths):
        block = blocks[i, :, i, :]
        p = float(np.trace(block).real)
        if p < ZERO_PRIOR:
            priors.append(0.0)
            states.append(DensityMatrix(np.eye(detector_dim) / detector_dim))
            zero_prior.append(True)
        else:
            priors.append(p)
            states.append(DensityMatrix.from_operator(block))
            zero_prior.append(False)
    priors = np.array(priors) / np.sum(priors)
    return DetectorEnsemble(priors, tuple(states), tuple(zero_prior))


def _require_two(ensemble):
    if ensemble.n_hypotheses != 2:
        raise HypothesisCountError(f"Helstrom solution needs 2 hypotheses, got {ensemble.n_hypotheses}")


def _helstrom_operator(ensemble):
    weighted = ensemble.weighted_states()
    return hermitize(weighted[0] - weighted[1])


def helstrom_success(ensemble):
    """
    Optimal two-hypothesis success probability ½(1 + ‖p1ρ1 − p2ρ2‖₁).
    """
    _require_two(ensemble)
    return 0.5 * (1.0 + trace_norm(_helstrom_operator(ensemble)))


def helstrom_povm(ensemble):
    """
    Projective measurement attaining the Helstrom bound.

    Π1 projects onto the non-negative eigenspace of p1ρ1 − p2ρ2 (zero
    eigenvalues included) and Π2 = I − Π1.

    Returns:
        PovmSet: (Π1, Π2)
    """
    _require_two(ensemble)
    values, vectors = hermitian_eig(_helstrom_operator(ensemble))
    kept = vectors[:, values >= -HELSTROM_TIE_TOL]
    first = kept @ np.conj(kept).T
    return PovmSet((first, np.eye(ensemble.dim) - first))


def povm_success(ensemble, povm):
    """
    Average success probability Σ p_i Tr(Π_i ρ_i).

    Args:
        ensemble (DetectorEnsemble): Hypotheses with priors
        povm (PovmSet or sequence of matrices): One element per hypothesis

    Returns:
        float: Success probability in [0, 1]
    """
    if not isinstance(povm, PovmSet):
        povm = PovmSet(tuple(povm))
    if len(povm) != ensemble.n_hypotheses:
        raise DimensionError(f"{len(povm)} POVM elements for {ensemble.n_hypotheses} hypotheses")
    if povm.dim != ensemble.dim:
        raise DimensionError(f"POVM dim {povm.dim} does not match detector dim {ensemble.dim}")
    value = sum(float(np.real(np.trace(e @ w))) for e, w in zip(povm.elements, ensemble.weighted_states()))
    return min(max(value, 0.0), 1.0)


def trivial_povm(ensemble):
    """Always guess the most likely hypothesis."""
    elements = [np.zeros((ensemble.dim, ensemble.dim), dtype=complex) for _ in range(ensemble.n_hypotheses)]
    elements[int(np.argmax(ensemble.priors))] = np.eye(ensemble.dim, dtype=complex)
    return PovmSet(tuple(elements))


def _complete(elements):
    """
    Rescale positive operators so they sum to the identity.

    Elements are conjugated by S^{-1/2} with S = ΣE_i (pseudo-inverse on the
    support); whatever S does not cover is added to the first element.
    """
    elements = [hermitize(e) for e in elements]
    scale = psd_inv_sqrt(sum(elements), cutoff=SUPPORT_CUTOFF)
    elements = [hermitize(scale @ e @ scale) for e in elements]
    elements[0] = elements[0] + hermitize(np.eye(elements[0].shape[0]) - sum(elements))
    return PovmSet(tuple(elements))


def pretty_good_measurement(ensemble):
    """
    Square-root measurement Π_i = ρ_det^{-1/2} p_iρ_i ρ_det^{-1/2}.

    The inverse root is taken on the support of ρ_det; the projector onto
    the kernel is added to Π1.
    """
    return _complete(ensemble.weighted_states())


def optimize_povm(ensemble, max_iters=DEFAULT_POVM_MAX_ITERS, tol=DEFAULT_POVM_TOL):
    """
    Minimum-error POVM by fixed-point iteration on the optimality conditions.

    Starting from the pretty-good measurement, each step maps
    Π_i → Λ^{-1} ρ̃_i Π_i ρ̃_i Λ^{-1} with ρ̃_i = p_iρ_i and
    Λ² = Σ_j ρ̃_j Π_j ρ̃_j. Iteration stops once the success probability
    changes by less than ``tol``; the best POVM seen is returned.

    Args:
        ensemble (DetectorEnsemble): Two or more hypotheses
        max_iters (int): Iteration cap
        tol (float): Stopping threshold on the success-probability change

    Returns:
        PovmOptimization: (povm, p_success, converged, iterations)
    """
    if ensemble.n_hypotheses < 2:
        raise HypothesisCountError("POVM optimization needs at least 2 hypotheses")
    weighted = ensemble.weighted_states()

    best_povm = trivial_povm(ensemble)
    best = povm_success(ensemble, best_povm)

    povm = pretty_good_measurement(ensemble)
    previous = povm_success(ensemble, povm)
    if previous > best:
        best_povm, best = povm, previous

    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        products = [w @ e @ w for w, e in zip(weighted, povm.elements)]
        povm = _complete(products)
        current = povm_success(ensemble, povm)
        if current > best:
            best_povm, best = povm, current
        if abs(current - previous) < tol:
            converged = True
            break
        previous = current

    if converged:
        logger.debug(f"POVM optimizer converged after {iterations} iterations: P_s={best:.12f}")
    else:
        logger.warning(f"POVM optimizer did not converge in {max_iters} iterations; best P_s={best:.12f}")
    return PovmOptimization(best_povm, best, converged, iterations)


def bagan_bound(n_paths):
    """Upper bound (1 − 1/N)² on C² + P²."""
    return (1.0 - 1.0 / n_paths) ** 2


def _zeta_from_priors(priors):
    if priors.size != 2:
        return float("nan")
    if priors[1] == 0.0:
        return float("inf")
    return float(np.sqrt(priors[0] / priors[1]))


def duality_point(state, n_paths=2, max_iters=DEFAULT_POVM_MAX_ITERS, tol=DEFAULT_POVM_TOL):
    """
    Coherence and path information of one state.

    C comes from the l1-norm coherence of the path system; P = P_s − 1/N
    with P_s from the Helstrom bound for two paths and from the POVM
    optimizer otherwise.

    Args:
        state: PreparedState, PureState or DensityMatrix with the path index first
        n_paths (int): Number of paths N
        max_iters (int): Optimizer cap used when N > 2
        tol (float): Optimizer tolerance used when N > 2

    Returns:
        DualityPoint: ζ, C, P, P_s and C² + P²
    """
    coherence = path_coherence(state, n_paths).c_normalized
    ensemble = extract_ensemble(state, n_paths)
    if n_paths == 2:
        p_success = helstrom_success(ensemble)
    else:
        p_success = optimize_povm(ensemble, max_iters=max_iters, tol=tol).p_success
    path_info = p_success - 1.0 / n_paths
    sum_of_squares = coherence ** 2 + path_info ** 2
    if sum_of_squares > bagan_bound(n_paths) + DUALITY_SLACK:
        raise DualityViolationError(
            f"C^2 + P^2 = {sum_of_squares:.12f} exceeds the bound {bagan_bound(n_paths):.12f}"
        )
    zeta = getattr(state, 'zeta', None)
    if zeta is None:
        zeta = _zeta_from_priors(ensemble.priors)
    return DualityPoint(float(zeta), coherence, path_info, p_success, sum_of_squares, int(n_paths))
