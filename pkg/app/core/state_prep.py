"""
State preparation for the Duality Tool.
Builds the singlet source, the half-wave-plate rotated states, the lossy
Brewster-window (or PBS) postselected states of the three state classes,
the general N-path target/detector state and the Fresnel window model.
"""
import logging
from dataclasses import dataclass

import numpy as np

from app.config.settings import (
    DEFAULT_EPSILON_H,
    DEFAULT_EPSILON_V,
    DEFAULT_REFRACTIVE_INDEX,
    DEFAULT_THETA_POINTS,
    DEFAULT_WINDOW_ANGLE_DEG,
    WINDOW_COUNTS,
)
from app.core.exceptions import (
    DimensionError,
    FilteredStateError,
    InvalidStateError,
    PriorError,
)
from app.core.qmath import (
    IDENTITY_2,
    DensityMatrix,
    PureState,
    as_density,
    dagger,
    projector,
)

logger = logging.getLogger(__name__)

POSTSELECTION_FLOOR = 1e-12
PRIOR_TOL = 1e-12

SINGLET_AMPLITUDES = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2.0)

STATE_CLASS_LABELS = ("I", "II", "III")


@dataclass(frozen=True)
class SourceSpec:
    """
    Quality of the entangled-pair source.

    Only ``noise_weight`` enters the prepared state, as a white-noise
    admixture w on the singlet. The visibilities only describe the source;
    ``from_noise_weight`` fills them with the HV and DA visibilities the
    noise model produces.
    """
    visibility_hv: float = 1.0
    visibility_da: float = 1.0
    noise_weight: float = 0.0

    def __post_init__(self):
        for name in ("visibility_hv", "visibility_da", "noise_weight"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidStateError(f"SourceSpec.{name} must lie in [0, 1], got {value}")

    @classmethod
    def from_noise_weight(cls, noise_weight):
        """Source whose visibilities are those predicted by the white-noise model, 1 − w."""
        return cls(visibility_hv=1.0 - noise_weight, visibility_da=1.0 - noise_weight,
                   noise_weight=noise_weight)


@dataclass(frozen=True)
class LossChannel:
    """Polarization-dependent loss: amplitude transmissions per pass and the pass count."""
    t_h: float
    t_v: float
    passes: int

    def __post_init__(self):
        if not 0.0 <= self.t_v <= self.t_h <= 1.0:
            raise InvalidStateError(
                f"LossChannel requires 0 <= t_v <= t_h <= 1, got t_h={self.t_h}, t_v={self.t_v}"
            )
        if int(self.passes) != self.passes or self.passes < 0:
            raise InvalidStateError(f"LossChannel.passes must be a non-negative integer, got {self.passes}")

    @classmethod
    def from_intensity(cls, epsilon_h, epsilon_v, passes):
        """
        Channel from measured intensity transmissions per window.

        Args:
            epsilon_h (float): Intensity transmission of H per window
            epsilon_v (float): Intensity transmission of V per window
            passes (int): Number of windows

        Returns:
            LossChannel: Channel with amplitude √ε per pass
        """
        return cls(float(np.sqrt(epsilon_h)), float(np.sqrt(epsilon_v)), int(passes))

    @property
    def amplitudes(self):
        """Total amplitude factors (t_h^n, t_v^n)."""
        return self.t_h ** self.passes, self.t_v ** self.passes

    def kraus(self):
        a, b = self.amplitudes
        return np.diag([a, b]).astype(complex)


@dataclass(frozen=True)
class StateClass:
    label: str
    channel: LossChannel


@dataclass(frozen=True)
class PreparedState:
    """A postselected target⊗detector state and the parameters that produced it."""
    state: DensityMatrix
    postselection_probability: float
    hwp_angle: float
    zeta: float
    label: str


def state_class(label, epsilon_h=DEFAULT_EPSILON_H, epsilon_v=DEFAULT_EPSILON_V, windows=None):
    """
    Build one of the three state classes.

    Classes I and II stack Brewster windows (4 and 6 by default) with the
    given intensity transmissions; class III is the polarizing beam splitter
    limit that transmits H only.

    Args:
        label (str): 'I', 'II' or 'III'
        epsilon_h (float): Intensity transmission of H per window
        epsilon_v (float): Intensity transmission of V per window
        windows (int, optional): Override of the window count for classes I/II

    Returns:
        StateClass: The labelled channel
    """
    if label == "III":
        return StateClass("III", LossChannel(1.0, 0.0, 1))
    if label not in WINDOW_COUNTS:
        raise InvalidStateError(f"Unknown state class '{label}', expected one of {STATE_CLASS_LABELS}")
    passes = WINDOW_COUNTS[label] if windows is None else windows
    return StateClass(label, LossChannel.from_intensity(epsilon_h, epsilon_v, passes))


def singlet(spec=None):
    """
    Source state (1 − w)|ψ⁻⟩⟨ψ⁻| + w·I/4.

    Args:
        spec (SourceSpec, optional): Source quality; the pure singlet when omitted

    Returns:
        DensityMatrix: Two-qubit source state
    """
    noise_weight = 0.0 if spec is None else spec.noise_weight
    pure = np.outer(SINGLET_AMPLITUDES, SINGLET_AMPLITUDES)
    return DensityMatrix.from_operator((1.0 - noise_weight) * pure + noise_weight * np.eye(4) / 4.0)


def hwp_unitary(theta):
    """Half-wave plate at angle θ: [[cos2θ, sin2θ], [sin2θ, −cos2θ]]."""
    c, s = np.cos(2.0 * theta), np.sin(2.0 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def hwp_amplitudes(theta):
    """
    Amplitudes (α, β, γ, δ) on (HH, HV, VH, VV) after the HWP acts on the target of |ψ⁻⟩.

    Returns:
        tuple: (−sin2θ/√2, cos2θ/√2, cos2θ/√2, sin2θ/√2)
    """
    c, s = np.cos(2.0 * theta), np.sin(2.0 * theta)
    root = np.sqrt(2.0)
    return -s / root, c / root, c / root, s / root


def zeta_parameter(amplitudes, a, b):
    """
    Prior-ratio parameter of a lossy four-component state.

    ζ = sqrt((|α|²a² + |β|²b²) / (|γ|²a² + |δ|²b²)) where a, b are the
    total H and V amplitude transmissions on the detector.

    Returns:
        float: ζ, which is 0 or inf when one target branch is filtered away
    """
    alpha, beta, gamma, delta = (abs(x) ** 2 for x in amplitudes)
    numerator = alpha * a ** 2 + beta * b ** 2
    denominator = gamma * a ** 2 + delta * b ** 2
    if numerator < POSTSELECTION_FLOOR and denominator < POSTSELECTION_FLOOR:
        raise FilteredStateError("Both target branches are filtered away")
    if denominator < POSTSELECTION_FLOOR:
        return float("inf")
    return float(np.sqrt(numerator / denominator))


def apply_loss(state, channel, side="detector"):
    """
    Apply the loss channel to one qubit and postselect on survival.

    Args:
        state (DensityMatrix): Two-qubit state, target first
        channel (LossChannel): Loss to apply
        side (str): 'target' or 'detector'

    Returns:
        tuple: (postselected DensityMatrix, postselection probability Tr(KρK†))
    """
    rho = as_density(state)
    if rho.dim != 4:
        raise DimensionError(f"apply_loss expects a two-qubit state, got dim {rho.dim}")
    if side == "detector":
        kraus = np.kron(IDENTITY_2, channel.kraus())
    elif side == "target":
        kraus = np.kron(channel.kraus(), IDENTITY_2)
    else:
        raise ValueError(f"side must be 'target' or 'detector', got {side!r}")
    filtered = kraus @ rho.matrix @ dagger(kraus)
    probability = float(np.trace(filtered).real)
    if probability < POSTSELECTION_FLOOR:
        raise FilteredStateError(f"Postselection probability {probability:.3e} is below {POSTSELECTION_FLOOR}")
    return DensityMatrix.from_operator(filtered), probability


def prepare(state_class_, theta, spec=None):
    """
    Run the preparation pipeline: singlet, HWP on the target, loss on the detector.

    Args:
        state_class_ (StateClass): Class whose channel is applied
        theta (float): HWP angle in radians
        spec (SourceSpec, optional): Source quality

    Returns:
        PreparedState: Postselected state with its ζ parameter
    """
    rotation = np.kron(hwp_unitary(theta), IDENTITY_2)
    rotated = rotation @ singlet(spec).matrix @ dagger(rotation)
    state, probability = apply_loss(DensityMatrix.from_operator(rotated), state_class_.channel, "detector")
    a, b = state_class_.channel.amplitudes
    zeta = zeta_parameter(hwp_amplitudes(theta), a, b)
    logger.debug(f"Prepared class {state_class_.label} at theta={theta:.6f}: zeta={zeta:.6g}, "
                 f"postselection={probability:.6f}")
    return PreparedState(state, probability, float(theta), zeta, state_class_.label)


def build_path_detector_state(priors, detectors):
    """
    Build Σ √p_i |i⟩|η_i⟩ for N paths.

    Args:
        priors (array-like): Path probabilities, non-negative and summing to one
        detectors (list): N detector states (PureState or amplitude vectors) of a common dim

    Returns:
        PureState: Normalized state on the N·d dimensional space, path index first
    """
    priors = np.asarray(priors, dtype=float)
    if priors.ndim != 1 or priors.size < 1:
        raise PriorError("Priors must be a one-dimensional probability vector")
    if np.any(priors < 0.0):
        raise PriorError(f"Priors must be non-negative, got {priors.tolist()}")
    if abs(priors.sum() - 1.0) > PRIOR_TOL:
        raise PriorError(f"Priors must sum to 1, got {priors.sum():.15f}")
    detectors = [d if isinstance(d, PureState) else PureState(d) for d in detectors]
    if len(detectors) != priors.size:
        raise DimensionError(f"{priors.size} priors but {len(detectors)} detector states")
    dims = {d.dim for d in detectors}
    if len(dims) != 1:
        raise DimensionError(f"Detector states have mixed dimensions {sorted(dims)}")
    n_paths = priors.size
    amplitudes = np.zeros(n_paths * detectors[0].dim, dtype=complex)
    for i, (p, eta) in enumerate(zip(priors, detectors)):
        path = np.zeros(n_paths)
        path[i] = 1.0
        amplitudes += np.sqrt(p) * np.kron(path, eta.normalize().amplitudes)
    return PureState(amplitudes).normalize()


def path_detector_density(priors, detectors):
    """Density-matrix form of build_path_detector_state."""
    return DensityMatrix.from_operator(projector(build_path_detector_state(priors, detectors)))


def fresnel_transmission(angle_deg, refractive_index, pol, surfaces=2):
    """
    Intensity transmission through air–glass interfaces.

    Each interface transmits 1 − r² with r from the Fresnel equations and
    Snell refraction; the glass–air exit face has the same reflectance, so
    a stack of surfaces transmits T^surfaces.

    Args:
        angle_deg (float or numpy.ndarray): Incidence angle in degrees, in [0, 90)
        refractive_index (float): Index of the glass, > 1
        pol (str): 's' or 'p'
        surfaces (int): Number of interfaces crossed

    Returns:
        float or numpy.ndarray: Transmission in [0, 1], same shape as angle_deg
    """
    angles = np.asarray(angle_deg, dtype=float)
    if np.any(angles < 0.0) or np.any(angles >= 90.0):
        raise ValueError("Incidence angle must lie in [0, 90) degrees")
    if refractive_index <= 1.0:
        raise ValueError(f"Refractive index must exceed 1, got {refractive_index}")
    if int(surfaces) != surfaces or surfaces < 1:
        raise ValueError(f"surfaces must be a positive integer, got {surfaces}")
    n = refractive_index
    theta_i = np.radians(angles)
    cos_i = np.cos(theta_i)
    cos_t = np.sqrt(1.0 - (np.sin(theta_i) / n) ** 2)
    if pol == "s":
        r = (cos_i - n * cos_t) / (cos_i + n * cos_t)
    elif pol == "p":
        r = (n * cos_i - cos_t) / (n * cos_i + cos_t)
    else:
        raise ValueError(f"pol must be 's' or 'p', got {pol!r}")
    transmission = (1.0 - r ** 2) ** int(surfaces)
    if transmission.ndim == 0:
        return float(transmission)
    return transmission


def brewster_angle(refractive_index):
    """Brewster angle atan(n) in degrees."""
    return float(np.degrees(np.arctan(refractive_index)))


def window_intensity_transmission(angle_deg=DEFAULT_WINDOW_ANGLE_DEG,
                                  refractive_index=DEFAULT_REFRACTIVE_INDEX, surfaces=2):
    """
    Intensity transmissions (ε_h, ε_v) of one window predicted by the Fresnel model.

    H light is p-polarized and V light s-polarized with respect to the tilted window.
    """
    return (fresnel_transmission(angle_deg, refractive_index, "p", surfaces),
            fresnel_transmission(angle_deg, refractive_index, "s", surfaces))


def theta_grid(points=DEFAULT_THETA_POINTS, lo=0.0, hi=np.pi / 4):
    """Evenly spaced HWP angles over [lo, hi]."""
    if points < 1:
        raise ValueError(f"theta grid needs at least one point, got {points}")
    return np.linspace(lo, hi, int(points))
