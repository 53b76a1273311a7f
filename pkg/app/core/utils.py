"""
Utility functions for the Duality Tool.
Includes helper functions used across the application.
"""
import numpy as np

# Stream identifiers mixed into every derived generator
STREAM_COUNTS = 0
STREAM_MONTE_CARLO = 1
STREAM_POVM = 2
STREAM_RANDOM_STATES = 3


def make_generator(seed, *keys):
    """
    Build a counter-based random generator for one independent stream.

    Each (seed, keys) pair yields its own Philox stream, so Monte Carlo
    rounds and sweep points can be drawn in any order, or in parallel,
    and still reproduce bit-for-bit.

    Args:
        seed (int): Master seed of the run
        *keys (int): Non-negative stream identifiers, e.g. (STREAM_MONTE_CARLO, point, round)

    Returns:
        numpy.random.Generator: Generator backed by the Philox bit generator
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))


def get_class_display_name(label):
    """
    Return the display name for a state class.

    Args:
        label (str): Class label ('I', 'II', 'III')

    Returns:
        str: Class display name for reports
    """
    if label == "I":
        return "Class I (4 Brewster windows)"
    elif label == "II":
        return "Class II (6 Brewster windows)"
    elif label == "III":
        return "Class III (PBS)"
    else:
        return "Custom channel"


def format_float(value, digits=6):
    """Render a float for log lines; infinities print as 'inf'."""
    if value is None:
        return "n/a"
    if np.isinf(value):
        return "inf"
    return f"{value:.{digits}f}"


def json_safe(value):
    """
    Convert numpy scalars, arrays and non-finite floats into JSON-friendly values.

    Infinite values become the strings 'inf' / '-inf' and NaN becomes None.
    """
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value
