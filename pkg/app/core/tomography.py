"""
Tomography pipeline for the Duality Tool.
Emulates the measurement side of the experiment: projective settings,
Born-rule probabilities, Poissonian photon counting, maximum-likelihood
reconstruction, Monte Carlo error bars and the direct POVM measurement
of the success probability.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from app.config.settings import (
    DEFAULT_MC_ROUNDS,
    DEFAULT_MLE_MAX_ITERS,
    DEFAULT_MLE_TOL,
    MC_FAILURE_LIMIT,
)
from app.core.discrimination import duality_point
from app.core.exceptions import DualityToolError, InvalidPovmError, TomographyError
from app.core.qmath import (
    DensityMatrix,
    as_density,
    hermitian_eig,
    hermitize,
    ket,
    projector,
)
from app.core.utils import STREAM_COUNTS, STREAM_MONTE_CARLO, STREAM_POVM, make_generator

logger = logging.getLogger(__name__)

TOMOGRAPHY_LABELS = ('H', 'V', 'D', 'A', 'R', 'L')
COUNTS_COLUMNS = ['setting_label', 'count', 'exposure']
PROJECTOR_TOL = 1e-10
# Smallest eigenvalue of the reconstruction start point
START_FLOOR = 1e-13
MIN_DILUTION = 1e-12
# Target path labels of the direct POVM measurement
PATH_LABELS = ('H', 'V')


@dataclass(frozen=True)
class MeasurementSetting:
    """Rank-1 projector of one analyzer setting."""
    projector: np.ndarray
    label: str

    def __post_init__(self):
        matrix = np.array(self.projector, dtype=complex)
        if (np.max(np.abs(matrix - np.conj(matrix).T)) > PROJECTOR_TOL
                or np.max(np.abs(matrix @ matrix - matrix)) > PROJECTOR_TOL
                or abs(np.trace(matrix) - 1.0) > PROJECTOR_TOL):
            raise InvalidPovmError(f"Setting '{self.label}' is not a rank-1 projector")
        matrix.setflags(write=False)
        object.__setattr__(self, 'projector', matrix)


@dataclass(frozen=True)
class CountsRecord:
    """Counts per setting label and the expected pairs per setting."""
    labels: tuple
    counts: np.ndarray
    exposure: float

    def __post_init__(self):
        counts = np.array(self.counts)
        if counts.shape != (len(self.labels),):
            raise TomographyError(f"{len(self.labels)} labels but {counts.size} counts")
        if np.any(counts < 0):
            raise TomographyError("Counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, 'labels', tuple(self.labels))
        object.__setattr__(self, 'counts', counts)

    @property
    def total(self):
        return float(np.sum(self.counts))

    def to_frame(self):
        """Counts as a DataFrame with the CSV column order."""
        return pd.DataFrame({
            'setting_label': list(self.labels),
            'count': self.counts,
            'exposure': self.exposure,
        }, columns=COUNTS_COLUMNS)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


@dataclass(frozen=True)
class UncertaintyReport:
    c_mean: float
    c_std: float
    p_mean: float
    p_std: float
    rounds: int
    failed_rounds: int = 0


class MleResult(NamedTuple):
    state: DensityMatrix
    converged: bool
    iterations: int
    log_likelihood: float
    history: list


@dataclass(frozen=True)
class PovmMeasurement:
    """Outcome operators of the direct measurement: target path ⊗ detector POVM element."""
    labels: tuple
    operators: tuple = field(repr=False)


def standard_settings():
    """
    The 36 product projectors over {H, V, D, A, R, L} on each qubit.

    Returns:
        list: MeasurementSetting objects labelled like 'HD'
    """
    settings = []
    for first in TOMOGRAPHY_LABELS:
        for second in TOMOGRAPHY_LABELS:
            label = first + second
            settings.append(MeasurementSetting(projector(ket(label)), label))
    return settings


def settings_from_labels(labels):
    """Rebuild product-projector settings from labels such as 'HV' or 'RL'."""
    return [MeasurementSetting(projector(ket(label)), label) for label in labels]


def _projector_stack(settings):
    return np.stack([s.projector for s in settings])


def _probabilities(stack, matrix):
    return np.real(np.einsum('kij,ji->k', stack, matrix))


def born_probability(rho, setting):
    """Tr(Πρ), clipped to [0, 1]."""
    value = float(np.real(np.trace(setting.projector @ as_density(rho).matrix)))
    return min(max(value, 0.0), 1.0)


def expected_counts(rho, settings, exposure):
    """
    Noise-free counts: exposure × Born probability per setting.

    Returns:
        CountsRecord: Real-valued counts
    """
    if exposure <= 0:
        raise ValueError(f"Exposure must be positive, got {exposure}")
    probabilities = np.clip(_probabilities(_projector_stack(settings), as_density(rho).matrix), 0.0, 1.0)
    return CountsRecord(tuple(s.label for s in settings), exposure * probabilities, float(exposure))


def simulate_counts(rho, settings, exposure, seed, keys=()):
    """
    Poissonian counts with mean exposure × Born probability.

    Args:
        rho (DensityMatrix): Measured state
        settings (list): MeasurementSetting objects
        exposure (float): Expected pairs per setting
        seed (int): Master seed
        keys (tuple): Stream identifiers of this draw

    Returns:
        CountsRecord: Integer counts, reproducible for fixed (seed, keys)
    """
    means = expected_counts(rho, settings, exposure)
    rng = make_generator(seed, STREAM_COUNTS, *keys)
    return CountsRecord(means.labels, rng.poisson(means.counts), float(exposure))


def read_counts_csv(path):
    """
    Load a counts CSV with columns setting_label, count, exposure.

    Returns:
        CountsRecord: Counts in file order
    """
    path = Path(path)
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise TomographyError(f"Cannot read counts file {path}: {e}")
    missing = [c for c in COUNTS_COLUMNS if c not in df.columns]
    if missing:
        raise TomographyError(f"Counts file {path} lacks columns {missing}")
    exposures = df['exposure'].unique()
    if len(exposures) != 1:
        raise TomographyError(f"Counts file {path} mixes exposures {exposures.tolist()}")
    return CountsRecord(tuple(df['setting_label'].astype(str)), df['count'].to_numpy(), float(exposures[0]))


def linear_inversion(counts, settings):
    """
    Least-squares solution of Tr(Π_k X) ∝ n_k, normalized to unit trace.

    The result is Hermitian but need not be positive.
    """
    stack = _projector_stack(settings)
    dim = stack.shape[1]
    design = np.conj(stack).reshape(len(settings), dim * dim)
    if np.linalg.matrix_rank(design) < dim * dim:
        raise TomographyError(f"Settings are not informationally complete for dim {dim}")
    solution, *_ = np.linalg.lstsq(design, np.asarray(counts.counts, dtype=float), rcond=None)
    matrix = hermitize(solution.reshape(dim, dim))
    trace = np.trace(matrix).real
    if trace <= 0.0:
        raise TomographyError("Linear inversion produced a non-positive trace")
    return matrix / trace


def _simplex_projection(values):
    # Euclidean projection of a vector onto the probability simplex
    ordered = np.sort(values)[::-1]
    cumulative = np.cumsum(ordered) - 1.0
    index = np.arange(1, values.size + 1)
    last = index[ordered - cumulative / index > 0][-1]
    return np.clip(values - cumulative[last - 1] / last, 0.0, None)


def project_to_physical(matrix, floor=0.0):
    """
    Closest density matrix in Frobenius norm to a Hermitian unit-trace matrix.

    Args:
        matrix (numpy.ndarray): Hermitian matrix
        floor (float): Eigenvalues are raised to at least this value before renormalizing

    Returns:
        DensityMatrix: The projection
    """
    values, vectors = hermitian_eig(hermitize(matrix))
    values = np.maximum(_simplex_projection(values), floor)
    return DensityMatrix.from_operator((vectors * values) @ np.conj(vectors).T)


def _log_likelihood(frequencies, observed, stack, normalizer, matrix):
    probabilities = _probabilities(stack, matrix)
    if np.any(probabilities[observed] <= 0.0):
        return -np.inf
    return float(np.sum(frequencies[observed] * np.log(probabilities[observed]))
                 - np.log(np.real(np.trace(normalizer @ matrix))))


def mle_reconstruct(counts, settings=None, tol=DEFAULT_MLE_TOL, max_iters=DEFAULT_MLE_MAX_ITERS,
                    warn=True):
    """
    Maximum-likelihood density matrix from Poissonian counts.

    Starts from the physical projection of the linear-inversion estimate
    and runs the diluted RρR iteration ρ → MρM†/Tr(MρM†) with
    M = (1 − ε)I + ε·Tr(Hρ)·H⁻¹R, R = Σ f_k Π_k / q_k and H = Σ Π_k.
    The dilution ε is halved whenever the likelihood would drop and doubled
    (up to 1) after each accepted step. Iteration stops once the accepted
    log-likelihood gain per unit ε falls below ``tol``.

    Args:
        counts (CountsRecord): Observed counts, one per setting
        settings (list, optional): Matching settings, the standard 36 by default
        tol (float): Stopping threshold on the log-likelihood gain
        max_iters (int): Iteration cap
        warn (bool): Log a warning when the cap is reached

    Returns:
        MleResult: (state, converged, iterations, log_likelihood, history)
    """
    settings = standard_settings() if settings is None else list(settings)
    if len(settings) != len(counts.labels):
        raise TomographyError(f"{len(counts.labels)} counts for {len(settings)} settings")
    if counts.total <= 0:
        raise TomographyError("No counts to reconstruct from")

    stack = _projector_stack(settings)
    dim = stack.shape[1]
    normalizer = hermitize(np.sum(stack, axis=0))
    try:
        normalizer_inv = np.linalg.inv(normalizer)
    except np.linalg.LinAlgError:
        raise TomographyError("Settings do not cover the whole state space")
    frequencies = np.asarray(counts.counts, dtype=float) / counts.total
    observed = frequencies > 0.0

    rho = project_to_physical(linear_inversion(counts, settings), floor=START_FLOOR).matrix
    likelihood = _log_likelihood(frequencies, observed, stack, normalizer, rho)
    history = [likelihood]
    dilution = 1.0
    converged = False
    iterations = 0

    for iterations in range(1, max_iters + 1):
        probabilities = _probabilities(stack, rho)
        weights = np.where(observed, frequencies / np.where(observed, probabilities, 1.0), 0.0)
        response = np.einsum('k,kij->ij', weights, stack)
        step = np.real(np.trace(normalizer @ rho)) * normalizer_inv @ response

        accepted = False
        while dilution >= MIN_DILUTION:
            update = (1.0 - dilution) * np.eye(dim) + dilution * step
            candidate = hermitize(update @ rho @ np.conj(update).T)
            candidate = candidate / np.real(np.trace(candidate))
            candidate_likelihood = _log_likelihood(frequencies, observed, stack, normalizer, candidate)
            if candidate_likelihood >= likelihood:
                accepted = True
                break
            dilution /= 2.0

        if not accepted:
            converged = True
            break

        gain = candidate_likelihood - likelihood
        rho, likelihood = candidate, candidate_likelihood
        history.append(likelihood)
        if gain < tol * dilution:
            converged = True
            break
        dilution = min(1.0, 2.0 * dilution)

    if not converged and warn:
        logger.warning(f"Reconstruction did not converge in {max_iters} iterations "
                       f"(log-likelihood {likelihood:.12f})")
    return MleResult(DensityMatrix.from_operator(rho), converged, iterations, likelihood, history)


def monte_carlo_uncertainty(counts, settings=None, rounds=DEFAULT_MC_ROUNDS, seed=0, keys=(), n_paths=2,
                            tol=DEFAULT_MLE_TOL, max_iters=DEFAULT_MLE_MAX_ITERS):
    """
    Monte Carlo error bars of C and P from Poisson-resampled counts.

    Each round redraws every count as Poisson(observed count) from its own
    generator (seed, keys, round), reconstructs and evaluates the duality
    point. Failed rounds are skipped; more than 1% failures is an error.

    Args:
        counts (CountsRecord): Observed counts
        settings (list, optional): Matching settings, the standard 36 by default
        rounds (int): Number of rounds, at least 2
        seed (int): Master seed
        keys (tuple): Stream identifiers of the point being evaluated
        n_paths (int): Number of paths of the reconstructed state
        tol (float): Reconstruction tolerance
        max_iters (int): Reconstruction iteration cap

    Returns:
        UncertaintyReport: Means and sample standard deviations of C and P
    """
    if rounds < 2:
        raise ValueError(f"Monte Carlo needs at least 2 rounds, got {rounds}")
    settings = standard_settings() if settings is None else list(settings)
    means = np.asarray(counts.counts, dtype=float)

    coherences, path_infos = [], []
    failed = 0
    not_converged = 0
    for round_index in range(rounds):
        rng = make_generator(seed, STREAM_MONTE_CARLO, *keys, round_index)
        resampled = CountsRecord(counts.labels, rng.poisson(means), counts.exposure)
        try:
            result = mle_reconstruct(resampled, settings, tol=tol, max_iters=max_iters, warn=False)
            point = duality_point(result.state, n_paths)
        except DualityToolError as e:
            failed += 1
            logger.debug(f"Monte Carlo round {round_index} failed: {e}")
            continue
        not_converged += not result.converged
        coherences.append(point.coherence)
        path_infos.append(point.path_info)

    if failed > MC_FAILURE_LIMIT * rounds:
        raise TomographyError(f"{failed} of {rounds} Monte Carlo rounds failed")
    if len(coherences) < 2:
        raise TomographyError("Fewer than two Monte Carlo rounds succeeded")
    if failed:
        logger.warning(f"Skipped {failed} of {rounds} Monte Carlo rounds")
    if not_converged:
        logger.warning(f"{not_converged} of {rounds} Monte Carlo reconstructions hit the iteration cap")

    report = UncertaintyReport(
        c_mean=float(np.mean(coherences)),
        c_std=float(np.std(coherences, ddof=1)),
        p_mean=float(np.mean(path_infos)),
        p_std=float(np.std(path_infos, ddof=1)),
        rounds=int(rounds),
        failed_rounds=failed,
    )
    logger.debug(f"Monte Carlo: C={report.c_mean:.6f}±{report.c_std:.6f}, "
                 f"P={report.p_mean:.6f}±{report.p_std:.6f} over {rounds} rounds")
    return report


def povm_settings(povm):
    """
    Outcome operators of the direct success-probability measurement.

    The target is analyzed in H/V and the detector with the POVM, giving
    one operator |i⟩⟨i| ⊗ Π_j per (path i, outcome j).

    Args:
        povm (PovmSet): Two-outcome detector POVM

    Returns:
        PovmMeasurement: Labels like 'H:1' and the matching operators
    """
    if len(povm) != len(PATH_LABELS):
        raise InvalidPovmError(f"Direct measurement expects {len(PATH_LABELS)} outcomes, got {len(povm)}")
    labels, operators = [], []
    for path in PATH_LABELS:
        target = projector(ket(path))
        for index, element in enumerate(povm.elements, start=1):
            labels.append(f"{path}:{index}")
            operators.append(np.kron(target, element))
    return PovmMeasurement(tuple(labels), tuple(operators))


def simulate_povm_counts(rho, povm, exposure, seed=None, keys=()):
    """
    Counts of the direct POVM measurement.

    Args:
        rho (DensityMatrix): Target⊗detector state
        povm (PovmSet): Detector POVM
        exposure (float): Expected pairs
        seed (int, optional): Master seed; None gives the exact expected counts

    Returns:
        CountsRecord: One count per (path, outcome) label
    """
    if exposure <= 0:
        raise ValueError(f"Exposure must be positive, got {exposure}")
    measurement = povm_settings(povm)
    matrix = as_density(rho).matrix
    probabilities = np.clip([np.real(np.trace(op @ matrix)) for op in measurement.operators], 0.0, 1.0)
    means = exposure * probabilities
    if seed is None:
        return CountsRecord(measurement.labels, means, float(exposure))
    rng = make_generator(seed, STREAM_POVM, *keys)
    return CountsRecord(measurement.labels, rng.poisson(means), float(exposure))


def povm_success_from_counts(counts):
    """
    Success probability S/T of a direct POVM measurement and its error.

    S counts outcomes matching the target path, F the others and T = S + F;
    the error is sqrt(S·F/T³).

    Returns:
        tuple: (P_s, sigma)
    """
    successes = failures = 0.0
    for label, count in zip(counts.labels, counts.counts):
        path, outcome = label.split(':')
        if PATH_LABELS.index(path) + 1 == int(outcome):
            successes += float(count)
        else:
            failures += float(count)
    total = successes + failures
    if total <= 0.0:
        raise TomographyError("Direct POVM measurement recorded no counts")
    return successes / total, float(np.sqrt(successes * failures / total ** 3))
