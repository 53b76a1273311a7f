"""
Configuration settings for the Duality Tool.
Contains physical constants, numerical defaults and the documented
config-file key list.
"""
import logging
from pathlib import Path

import numpy as np

from app.core.exceptions import ConfigError

logger = logging.getLogger(__name__)

# Measured intensity transmissions of one Brewster window (H is p, V is s)
DEFAULT_EPSILON_H = 0.997
DEFAULT_EPSILON_V = 0.719

# Windows stacked for the lossy state classes; class III uses a PBS instead
WINDOW_COUNTS = {
    'I': 4,
    'II': 6,
}
DEFAULT_CLASSES = ('I', 'II', 'III')

# Fused silica at 810 nm
DEFAULT_REFRACTIVE_INDEX = 1.4585
DEFAULT_WINDOW_ANGLE_DEG = 60.0
DEFAULT_FRESNEL_SURFACES = 2
DEFAULT_FRESNEL_START_DEG = 0.0
DEFAULT_FRESNEL_STOP_DEG = 89.0
DEFAULT_FRESNEL_STEP_DEG = 0.5

# Source and sweep
DEFAULT_NOISE_WEIGHT = 0.0
DEFAULT_THETA_POINTS = 21
DEFAULT_THETA_MIN = 0.0
DEFAULT_THETA_MAX = np.pi / 4

# Counting statistics
DEFAULT_EXPOSURE = 1e5
DEFAULT_MC_ROUNDS = 1000
DEFAULT_SEED = 20180101
MC_FAILURE_LIMIT = 0.01

# Iterative solvers
DEFAULT_MLE_TOL = 1e-10
DEFAULT_MLE_MAX_ITERS = 5000
DEFAULT_POVM_TOL = 1e-10
DEFAULT_POVM_MAX_ITERS = 10000

DEFAULT_OUT_DIR = Path("data/runs")

LOG_FORMAT = "%(asctime)s [%(levelname)s] [%(name)s] %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
VERBOSITY_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_labels(text):
    labels = tuple(part.strip() for part in text.split(',') if part.strip())
    if not labels:
        raise ValueError("empty label list")
    return labels


# Flat key = value config file keys: name -> (parser, description)
CONFIG_KEYS = {
    'classes': (_parse_labels, "Comma separated state classes to run (I, II, III)"),
    'theta_points': (int, "Number of HWP angles in the sweep grid"),
    'theta_min': (float, "First HWP angle in radians"),
    'theta_max': (float, "Last HWP angle in radians"),
    'windows_class_i': (int, "Brewster windows of class I"),
    'windows_class_ii': (int, "Brewster windows of class II"),
    'epsilon_h': (float, "Intensity transmission of H per window"),
    'epsilon_v': (float, "Intensity transmission of V per window"),
    'refractive_index': (float, "Refractive index of the window glass"),
    'noise_weight': (float, "White-noise admixture w of the source"),
    'exposure': (float, "Expected pairs per tomography setting"),
    'rounds': (int, "Monte Carlo rounds per point"),
    'seed': (int, "Master seed"),
    'out_dir': (Path, "Directory for CSV and JSON outputs"),
    'exact': (_parse_bool, "Use exact Born probabilities instead of Poisson counts"),
    'mle_tol': (float, "Log-likelihood gain tolerance of the reconstruction"),
    'mle_max_iters': (int, "Iteration cap of the reconstruction"),
    'povm_tol': (float, "Success-probability tolerance of the POVM optimizer"),
    'povm_max_iters': (int, "Iteration cap of the POVM optimizer"),
    'fresnel_start': (float, "First incidence angle of the Fresnel scan in degrees"),
    'fresnel_stop': (float, "Last incidence angle of the Fresnel scan in degrees"),
    'fresnel_step': (float, "Angle step of the Fresnel scan in degrees"),
    'fresnel_surfaces': (int, "Interfaces crossed per window"),
}


def parse_config_value(key, text):
    """
    Parse one config value with the parser registered for its key.

    Args:
        key (str): Config key from CONFIG_KEYS
        text (str): Raw value

    Returns:
        Parsed value
    """
    if key not in CONFIG_KEYS:
        raise ConfigError(f"Unknown config key '{key}'")
    parser, _ = CONFIG_KEYS[key]
    try:
        return parser(text.strip())
    except ValueError as e:
        raise ConfigError(f"Invalid value for '{key}': {text.strip()!r} ({e})")


def read_config_file(path):
    """
    Read a flat key = value config file.

    Blank lines and lines starting with '#' are ignored; trailing '#'
    comments are stripped.

    Args:
        path (str or Path): Config file location

    Returns:
        dict: Parsed values keyed by config key
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")

    values = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {raw!r}")
        key, text = (part.strip() for part in line.split('=', 1))
        values[key] = parse_config_value(key, text)

    logger.debug(f"Read {len(values)} config values from {path}")
    return values
