"""
Experiment orchestration for the Duality Tool.
Runs the ζ sweeps per state class, the Bagan-equality table, the
analytic-versus-POVM comparison, the Fresnel scan and single-state
tomography, and writes their CSV and JSON outputs.
"""
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from app import __version__
from app.config.settings import (
    CONFIG_KEYS,
    DEFAULT_CLASSES,
    DEFAULT_EPSILON_H,
    DEFAULT_EPSILON_V,
    DEFAULT_EXPOSURE,
    DEFAULT_FRESNEL_START_DEG,
    DEFAULT_FRESNEL_STEP_DEG,
    DEFAULT_FRESNEL_STOP_DEG,
    DEFAULT_FRESNEL_SURFACES,
    DEFAULT_MC_ROUNDS,
    DEFAULT_MLE_MAX_ITERS,
    DEFAULT_MLE_TOL,
    DEFAULT_NOISE_WEIGHT,
    DEFAULT_OUT_DIR,
    DEFAULT_POVM_MAX_ITERS,
    DEFAULT_POVM_TOL,
    DEFAULT_REFRACTIVE_INDEX,
    DEFAULT_SEED,
    DEFAULT_THETA_MAX,
    DEFAULT_THETA_MIN,
    DEFAULT_THETA_POINTS,
    DEFAULT_WINDOW_ANGLE_DEG,
    WINDOW_COUNTS,
)
from app.core.discrimination import (
    DualityPoint,
    bagan_bound,
    duality_point,
    extract_ensemble,
    helstrom_povm,
    helstrom_success,
)
from app.core.exceptions import ConfigError
from app.core.measures import concurrence, fidelity, purity, visibility
from app.core.state_prep import (
    STATE_CLASS_LABELS,
    SourceSpec,
    brewster_angle,
    fresnel_transmission,
    prepare,
    state_class,
    theta_grid,
    window_intensity_transmission,
)
from app.core.tomography import (
    UncertaintyReport,
    expected_counts,
    mle_reconstruct,
    monte_carlo_uncertainty,
    povm_success_from_counts,
    read_counts_csv,
    settings_from_labels,
    simulate_counts,
    simulate_povm_counts,
    standard_settings,
)
from app.core.utils import format_float, get_class_display_name, json_safe

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ['zeta', 'C_theory', 'P_theory', 'C_tomo', 'C_err', 'P_tomo', 'P_err',
                 'state_class', 'theta', 'sum_theory', 'sum_tomo']
BAGAN_COLUMNS = ['state_class', 'theta', 'zeta', 'background', 'sum_theory', 'sum_tomography',
                 'sum_tomography_err', 'sum_povm', 'sum_povm_err']
POVM_COLUMNS = ['theta', 'zeta', 'P_analytic', 'P_analytic_err', 'P_povm', 'P_povm_err',
                'mismatch', 'combined_err']
FRESNEL_COLUMNS = ['angle_deg', 'T_p', 'T_s', 'is_brewster']

# Stream key of the tomography counts and of the direct POVM counts at one point
COUNTS_KEY = 0
POVM_KEY = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Every physical and numerical knob of a run."""
    classes: tuple = DEFAULT_CLASSES
    theta_points: int = DEFAULT_THETA_POINTS
    theta_min: float = DEFAULT_THETA_MIN
    theta_max: float = DEFAULT_THETA_MAX
    windows_class_i: int = WINDOW_COUNTS['I']
    windows_class_ii: int = WINDOW_COUNTS['II']
    epsilon_h: float = DEFAULT_EPSILON_H
    epsilon_v: float = DEFAULT_EPSILON_V
    refractive_index: float = DEFAULT_REFRACTIVE_INDEX
    noise_weight: float = DEFAULT_NOISE_WEIGHT
    exposure: float = DEFAULT_EXPOSURE
    rounds: int = DEFAULT_MC_ROUNDS
    seed: int = DEFAULT_SEED
    out_dir: Path = DEFAULT_OUT_DIR
    exact: bool = False
    mle_tol: float = DEFAULT_MLE_TOL
    mle_max_iters: int = DEFAULT_MLE_MAX_ITERS
    povm_tol: float = DEFAULT_POVM_TOL
    povm_max_iters: int = DEFAULT_POVM_MAX_ITERS
    fresnel_start: float = DEFAULT_FRESNEL_START_DEG
    fresnel_stop: float = DEFAULT_FRESNEL_STOP_DEG
    fresnel_step: float = DEFAULT_FRESNEL_STEP_DEG
    fresnel_surfaces: int = DEFAULT_FRESNEL_SURFACES

    def __post_init__(self):
        object.__setattr__(self, 'classes', tuple(self.classes))
        object.__setattr__(self, 'out_dir', Path(self.out_dir))
        unknown = [c for c in self.classes if c not in STATE_CLASS_LABELS]
        if not self.classes or unknown:
            raise ConfigError(f"classes must be drawn from {STATE_CLASS_LABELS}, got {list(self.classes)}")
        checks = [
            (self.theta_points >= 1, "theta_points must be at least 1"),
            (0.0 < self.epsilon_v <= self.epsilon_h <= 1.0, "need 0 < epsilon_v <= epsilon_h <= 1"),
            (self.windows_class_i >= 0 and self.windows_class_ii >= 0, "window counts must be non-negative"),
            (self.refractive_index > 1.0, "refractive_index must exceed 1"),
            (0.0 <= self.noise_weight <= 1.0, "noise_weight must lie in [0, 1]"),
            (self.exposure > 0.0, "exposure must be positive"),
            (self.rounds >= 2, "rounds must be at least 2"),
            (self.mle_tol > 0.0 and self.povm_tol > 0.0, "tolerances must be positive"),
            (self.mle_max_iters >= 1 and self.povm_max_iters >= 1, "iteration caps must be at least 1"),
            (0.0 <= self.fresnel_start <= self.fresnel_stop <= 89.0, "Fresnel angles must satisfy 0 <= start <= stop <= 89"),
            (self.fresnel_step > 0.0, "fresnel_step must be positive"),
            (self.fresnel_surfaces >= 1, "fresnel_surfaces must be at least 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    @classmethod
    def from_mapping(cls, values):
        """
        Build a config from parsed config-file values and CLI overrides.

        Args:
            values (dict): Keys from CONFIG_KEYS; None values are ignored

        Returns:
            ExperimentConfig: Defaults updated with the given values
        """
        unknown = [key for key in values if key not in CONFIG_KEYS]
        if unknown:
            raise ConfigError(f"Unknown config keys {unknown}")
        return cls(**{key: value for key, value in values.items() if value is not None})

    def to_dict(self):
        echo = {f.name: getattr(self, f.name) for f in fields(self)}
        echo["out_dir"] = str(self.out_dir)
        return json_safe(echo)

    def source_spec(self):
        return SourceSpec.from_noise_weight(self.noise_weight)

    def state_class(self, label):
        windows = {'I': self.windows_class_i, 'II': self.windows_class_ii}.get(label)
        return state_class(label, self.epsilon_h, self.epsilon_v, windows)

    def thetas(self):
        return theta_grid(self.theta_points, self.theta_min, self.theta_max)


@dataclass(frozen=True)
class SweepPoint:
    theta: float
    theory: DualityPoint
    tomography: DualityPoint
    uncertainty: UncertaintyReport


@dataclass
class SweepResult:
    """Theory and tomography duality points of one state class, ordered by ζ."""
    label: str
    points: list = field(default_factory=list)
    base_concurrence: float = 0.0
    base_purity: float = 0.0
    base_visibility_hv: float = 0.0
    base_visibility_da: float = 0.0

    def to_frame(self):
        rows = []
        for point in self.points:
            rows.append({
                'zeta': point.theory.zeta,
                'C_theory': point.theory.coherence,
                'P_theory': point.theory.path_info,
                'C_tomo': point.tomography.coherence,
                'C_err': point.uncertainty.c_std,
                'P_tomo': point.tomography.path_info,
                'P_err': point.uncertainty.p_std,
                'state_class': self.label,
                'theta': point.theta,
                'sum_theory': point.theory.sum_of_squares,
                'sum_tomo': point.tomography.sum_of_squares,
            })
        return pd.DataFrame(rows, columns=SWEEP_COLUMNS)

    def summary(self):
        frame = self.to_frame()
        return {
            'state_class': self.label,
            'display_name': get_class_display_name(self.label),
            'points': len(self.points),
            'base_concurrence': self.base_concurrence,
            'base_purity': self.base_purity,
            'base_visibility_hv': self.base_visibility_hv,
            'base_visibility_da': self.base_visibility_da,
            'max_sum_theory': float(frame['sum_theory'].max()),
            'max_abs_sum_deviation_theory': float((frame['sum_theory'] - 0.25).abs().max()),
            'max_P_theory': float(frame['P_theory'].max()),
            'max_C_theory': float(frame['C_theory'].max()),
        }


class _PointMeasurement:
    """Tomography of one prepared state: counts, reconstruction and error bars."""

    def __init__(self, config, prepared, keys):
        self.config = config
        self.prepared = prepared
        self.keys = keys
        self.settings = standard_settings()
        if config.exact:
            self.counts = expected_counts(prepared.state, self.settings, config.exposure)
        else:
            self.counts = simulate_counts(prepared.state, self.settings, config.exposure, config.seed,
                                          keys + (COUNTS_KEY,))
        self.reconstruction = mle_reconstruct(self.counts, self.settings, tol=config.mle_tol,
                                              max_iters=config.mle_max_iters)
        self.point = duality_point(self.reconstruction.state, 2)
        if config.exact:
            self.uncertainty = UncertaintyReport(self.point.coherence, 0.0, self.point.path_info, 0.0, rounds=0)
        else:
            self.uncertainty = monte_carlo_uncertainty(
                self.counts, self.settings, rounds=config.rounds, seed=config.seed, keys=keys,
                tol=config.mle_tol, max_iters=config.mle_max_iters,
            )

    def sum_error(self, path_info, path_info_err):
        """Propagated error of C² + P² from independent errors on C and P."""
        return float(np.hypot(2.0 * self.point.coherence * self.uncertainty.c_std,
                              2.0 * path_info * path_info_err))


def _zeta_sort_key(point):
    return point.theory.zeta


def run_sweep(config, label=None):
    """
    ζ sweep of one state class: theory and simulated tomography per HWP angle.

    Args:
        config (ExperimentConfig): Run configuration
        label (str, optional): State class, the first configured class by default

    Returns:
        SweepResult: Points ordered by ζ with base-state metadata
    """
    label = config.classes[0] if label is None else label
    chosen = config.state_class(label)
    spec = config.source_spec()
    class_index = STATE_CLASS_LABELS.index(label)

    base = prepare(chosen, 0.0, spec)
    result = SweepResult(
        label=label,
        base_concurrence=concurrence(base.state),
        base_purity=purity(base.state),
        base_visibility_hv=visibility(base.state, 'HV'),
        base_visibility_da=visibility(base.state, 'DA'),
    )
    logger.info(f"Sweeping {get_class_display_name(label)} over {config.theta_points} angles "
                f"(concurrence {result.base_concurrence:.4f}, purity {result.base_purity:.4f})")

    for index, theta in enumerate(config.thetas()):
        prepared = prepare(chosen, theta, spec)
        theory = duality_point(prepared, 2)
        measured = _PointMeasurement(config, prepared, (class_index, index))
        result.points.append(SweepPoint(float(theta), theory, measured.point, measured.uncertainty))
        logger.debug(f"class {label} theta={theta:.4f} zeta={format_float(theory.zeta)}: "
                     f"C={theory.coherence:.6f} P={theory.path_info:.6f} "
                     f"C_tomo={measured.point.coherence:.6f}±{measured.uncertainty.c_std:.6f}")

    result.points.sort(key=_zeta_sort_key)
    return result


def run_bagan_table(config):
    """
    C² + P² of every generated state from the tomography and direct-POVM pipelines.

    The POVM pipeline measures the detector with the Helstrom projectors
    of the prepared state and takes C from tomography. Class III rows are
    tagged 'povm', the Brewster-window classes 'tomography'.

    Returns:
        pandas.DataFrame: One row per (class, θ) with the BAGAN_COLUMNS
    """
    spec = config.source_spec()
    rows = []
    for label in config.classes:
        chosen = config.state_class(label)
        class_index = STATE_CLASS_LABELS.index(label)
        for index, theta in enumerate(config.thetas()):
            prepared = prepare(chosen, theta, spec)
            theory = duality_point(prepared, 2)
            measured = _PointMeasurement(config, prepared, (class_index, index))

            povm = helstrom_povm(extract_ensemble(prepared, 2))
            seed = None if config.exact else config.seed
            povm_counts = simulate_povm_counts(prepared.state, povm, config.exposure, seed,
                                               (class_index, index, POVM_KEY))
            p_success, p_success_err = povm_success_from_counts(povm_counts)
            path_info = p_success - 0.5

            rows.append({
                'state_class': label,
                'theta': float(theta),
                'zeta': prepared.zeta,
                'background': 'povm' if label == 'III' else 'tomography',
                'sum_theory': theory.sum_of_squares,
                'sum_tomography': measured.point.sum_of_squares,
                'sum_tomography_err': measured.sum_error(measured.point.path_info, measured.uncertainty.p_std),
                'sum_povm': measured.point.coherence ** 2 + path_info ** 2,
                'sum_povm_err': measured.sum_error(path_info, p_success_err),
            })
        logger.info(f"Bagan table: finished {get_class_display_name(label)}")
    return pd.DataFrame(rows, columns=BAGAN_COLUMNS)


def run_povm_comparison(config):
    """
    Success probability from the analytic solution versus the direct POVM measurement.

    P_analytic is the Helstrom success probability of the reconstructed
    state with its Monte Carlo error; P_povm is S/T of the simulated
    POVM counts. Both columns hold success probabilities.

    Returns:
        pandas.DataFrame: One class III row per θ with the POVM_COLUMNS
    """
    spec = config.source_spec()
    chosen = config.state_class('III')
    class_index = STATE_CLASS_LABELS.index('III')
    rows = []
    for index, theta in enumerate(config.thetas()):
        prepared = prepare(chosen, theta, spec)
        measured = _PointMeasurement(config, prepared, (class_index, index))
        p_analytic = helstrom_success(extract_ensemble(measured.reconstruction.state, 2))

        povm = helstrom_povm(extract_ensemble(prepared, 2))
        seed = None if config.exact else config.seed
        povm_counts = simulate_povm_counts(prepared.state, povm, config.exposure, seed,
                                           (class_index, index, POVM_KEY))
        p_povm, p_povm_err = povm_success_from_counts(povm_counts)

        p_analytic_err = measured.uncertainty.p_std
        rows.append({
            'theta': float(theta),
            'zeta': prepared.zeta,
            'P_analytic': p_analytic,
            'P_analytic_err': p_analytic_err,
            'P_povm': p_povm,
            'P_povm_err': p_povm_err,
            'mismatch': abs(p_analytic - p_povm),
            'combined_err': float(np.hypot(p_analytic_err, p_povm_err)),
        })
    frame = pd.DataFrame(rows, columns=POVM_COLUMNS)
    logger.info(f"POVM comparison: max mismatch {frame['mismatch'].max():.3e}")
    return frame


def run_fresnel_scan(angles, refractive_index=DEFAULT_REFRACTIVE_INDEX, pols=('p', 's'),
                     surfaces=DEFAULT_FRESNEL_SURFACES):
    """
    Window transmission per incidence angle and polarization.

    Args:
        angles (array-like): Incidence angles in degrees, within [0, 89]
        refractive_index (float): Index of the glass
        pols (tuple): Polarizations to report, from 'p' and 's'
        surfaces (int): Interfaces crossed

    Returns:
        pandas.DataFrame: FRESNEL_COLUMNS; is_brewster marks the p-transmission maximum
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0 or np.any(angles < 0.0) or np.any(angles > 89.0):
        raise ValueError("Fresnel scan angles must lie in [0, 89] degrees")
    frame = pd.DataFrame({'angle_deg': angles})
    for pol in ('p', 's'):
        if pol in pols:
            frame[f"T_{pol}"] = fresnel_transmission(angles, refractive_index, pol, surfaces)
    p_curve = frame['T_p'] if 'T_p' in frame else pd.Series(
        fresnel_transmission(angles, refractive_index, 'p', surfaces))
    frame['is_brewster'] = False
    frame.loc[int(np.argmax(p_curve.to_numpy())), 'is_brewster'] = True
    return frame[[c for c in FRESNEL_COLUMNS if c in frame.columns]]


def fresnel_summary(frame, refractive_index=DEFAULT_REFRACTIVE_INDEX, surfaces=DEFAULT_FRESNEL_SURFACES):
    """Brewster angle, the scanned transmission maximum and the window transmissions at the working angle."""
    epsilon_h, epsilon_v = window_intensity_transmission(DEFAULT_WINDOW_ANGLE_DEG, refractive_index, surfaces)
    return {
        'refractive_index': refractive_index,
        'surfaces': surfaces,
        'brewster_angle_deg': brewster_angle(refractive_index),
        'scanned_brewster_deg': float(frame.loc[frame['is_brewster'], 'angle_deg'].iloc[0]),
        'window_angle_deg': DEFAULT_WINDOW_ANGLE_DEG,
        'window_T_p': epsilon_h,
        'window_T_s': epsilon_v,
    }


def fresnel_angles(config):
    """Scan grid from the config, stop included."""
    count = int(np.floor((config.fresnel_stop - config.fresnel_start) / config.fresnel_step + 1e-9)) + 1
    return config.fresnel_start + config.fresnel_step * np.arange(count)


def run_tomography(config, label='III', theta=np.pi / 8, counts_path=None):
    """
    Tomography of one prepared state, or of counts loaded from a CSV file.

    Args:
        config (ExperimentConfig): Run configuration
        label (str): State class of the simulated state
        theta (float): HWP angle of the simulated state
        counts_path (str or Path, optional): Reconstruct these counts instead of simulating

    Returns:
        tuple: (CountsRecord, summary dict)
    """
    prepared = None
    if counts_path is None:
        prepared = prepare(config.state_class(label), theta, config.source_spec())
        settings = standard_settings()
        if config.exact:
            counts = expected_counts(prepared.state, settings, config.exposure)
        else:
            counts = simulate_counts(prepared.state, settings, config.exposure, config.seed,
                                     (STATE_CLASS_LABELS.index(label), 0, COUNTS_KEY))
    else:
        counts = read_counts_csv(counts_path)
        settings = settings_from_labels(counts.labels)

    result = mle_reconstruct(counts, settings, tol=config.mle_tol, max_iters=config.mle_max_iters)
    point = duality_point(result.state, 2)
    summary = {
        'coherence': point.coherence,
        'path_info': point.path_info,
        'p_success': point.p_success,
        'sum_of_squares': point.sum_of_squares,
        'bound': bagan_bound(2),
        'purity': purity(result.state),
        'concurrence': concurrence(result.state),
        'converged': result.converged,
        'iterations': result.iterations,
        'log_likelihood': result.log_likelihood,
        'density_matrix_real': np.real(result.state.matrix),
        'density_matrix_imag': np.imag(result.state.matrix),
    }
    if prepared is not None:
        summary.update({
            'state_class': label,
            'theta': float(theta),
            'zeta': prepared.zeta,
            'fidelity': fidelity(result.state, prepared.state),
        })
    if not config.exact and counts_path is None:
        report = monte_carlo_uncertainty(counts, settings, rounds=config.rounds, seed=config.seed,
                                         keys=(STATE_CLASS_LABELS.index(label), 0),
                                         tol=config.mle_tol, max_iters=config.mle_max_iters)
        summary.update({'coherence_err': report.c_std, 'path_info_err': report.p_std})
    return counts, summary


def write_run(out_dir, name, frame, subcommand, config, summary):
    """
    Write <name>.csv and <name>.json (manifest plus summary) into out_dir.

    Returns:
        tuple: (csv path, json path)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    json_path = out_dir / f"{name}.json"
    frame.to_csv(csv_path, index=False)
    document = {
        'manifest': {
            'subcommand': subcommand,
            'version': __version__,
            'seed': config.seed,
            'exact': config.exact,
            'config': config.to_dict(),
            'outputs': [csv_path.name, json_path.name],
        },
        'summary': json_safe(summary),
    }
    json_path.write_text(json.dumps(document, indent=2, sort_keys=False))
    logger.info(f"Wrote {csv_path} and {json_path}")
    return csv_path, json_path
