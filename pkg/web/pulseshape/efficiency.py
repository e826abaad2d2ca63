"""
Control-pulse efficiency over a spectral profile and sech calibration.
"""

import logging
import math

import numpy as np
from scipy.optimize import brentq

from physmodel.spectra import SpectralProfile

from .exceptions import CalibrationFailed
from .propagation import transfer_probabilities
from .shapes import PulseSpec, SechShape

logger = logging.getLogger(__name__)

DEFAULT_CHIRP_MU = 2.0
TARGET_EFFICIENCY = 0.938
SCAN_POINTS = 24


def transfer_efficiency(spec: PulseSpec, profile: SpectralProfile) -> float:
    """
    Mean inversion of ``spec`` weighted over ``profile``.

    Raises:
        UnnormalizedProfile: if the profile weights do not sum to one
    """
    profile.require_normalized()
    probabilities = transfer_probabilities(spec, profile.detunings)
    return float(min(max(profile.average(probabilities), 0.0), 1.0))


def sech_pulse(
    duration: float,
    peak_rabi: float,
    chirp_mu: float = DEFAULT_CHIRP_MU,
    transition: str = "f35",
    center_time: float = 0.0,
    direction: tuple[float, float] = (1.0, 0.0),
) -> PulseSpec:
    """Sech control pulse whose truncated support equals ``duration``."""
    beta = 10.0 / duration
    return PulseSpec(
        transition=transition,
        center_time=center_time,
        shape=SechShape(peak_rabi=peak_rabi, beta=beta, chirp_mu=chirp_mu),
        nominal_area=math.pi,
        direction=direction,
    )


def calibrate_sech(
    duration: float,
    profile: SpectralProfile,
    chirp_mu: float = DEFAULT_CHIRP_MU,
    target: float = TARGET_EFFICIENCY,
    transition: str = "f35",
) -> SechShape:
    """
    Find the peak Rabi frequency at which a sech of fixed duration and chirp
    reaches ``target`` mean inversion over ``profile``.

    The peak is scanned geometrically from well below to well above the
    adiabatic threshold μβ/2π; the first bracket crossing the target is
    refined with brentq.

    Raises:
        CalibrationFailed: when no scanned amplitude reaches the target
    """
    profile.require_normalized()
    beta = 10.0 / duration
    threshold = max(chirp_mu, 1.0) * beta / (2 * math.pi)

    def efficiency(peak: float) -> float:
        spec = sech_pulse(duration, peak, chirp_mu, transition)
        return transfer_efficiency(spec, profile)

    peaks = np.geomspace(0.05 * threshold, 10.0 * threshold, SCAN_POINTS)
    previous_peak, previous_value = 0.0, 0.0
    for peak in peaks:
        value = efficiency(float(peak))
        if value >= target:
            refined = brentq(
                lambda p: efficiency(p) - target,
                previous_peak,
                float(peak),
                xtol=1e-6 * float(peak),
            )
            logger.info(
                f"Calibrated sech ({duration * 1e6:.3g} us, mu={chirp_mu}) "
                f"to peak {refined:.6g} Hz after bracket "
                f"[{previous_peak:.4g}, {peak:.4g}]"
            )
            return SechShape(peak_rabi=float(refined), beta=beta, chirp_mu=chirp_mu)
        previous_peak, previous_value = float(peak), value
    raise CalibrationFailed(
        f"best efficiency {previous_value:.4f} below target {target} "
        f"for duration {duration} s and mu {chirp_mu}"
    )
