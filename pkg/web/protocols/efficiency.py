"""
Closed-form NLPE storage efficiency and its decay curves.

The efficiency is the forward-retrieval echo factor d²e^{-d}, times the fourth
power of the control transfer efficiency, times Gaussian dephasing of the
ground spin coherence over t4 - t1, times Gaussian dephasing of the excited
spin inhomogeneity and exponential optical decoherence over t3 - t2.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from physmodel.material import MaterialParams

from .exceptions import ProtocolError
from .sequences import REFERENCE_TIMINGS, NlpeTimings

logger = logging.getLogger(__name__)

TAU2 = "tau2"
TAU3 = "tau3"
DECAY_VARIABLES = (TAU2, TAU3)

# π²/(2 ln 2): Gaussian dephasing exponent per (FWHM · delay)²
GAUSSIAN_DEPHASING = math.pi**2 / (2 * math.log(2))


def echo_factor(d: float) -> float:
    return d**2 * math.exp(-d)


def gaussian_dephasing(fwhm: float, delay: float) -> float:
    return math.exp(-GAUSSIAN_DEPHASING * (fwhm * delay) ** 2)


def _efficiency(
    params: MaterialParams, spin_delay: float, optical_delay: float, eta_control: float
) -> float:
    return (
        echo_factor(params.d)
        * eta_control**4
        * gaussian_dephasing(params.gamma13, spin_delay)
        * gaussian_dephasing(params.gamma35bar, optical_delay)
        * math.exp(-2 * params.gamma_opt * optical_delay)
    )


def nlpe_efficiency(
    params: MaterialParams, timings: NlpeTimings, eta_control: float = 1.0
) -> float:
    """
    Storage efficiency of the noiseless photon echo.

    Args:
        params: Material constants (d, Γ13, Γ35bar, γ)
        timings: Pulse centers t0..t4
        eta_control: Mean transfer efficiency of one control π pulse
    """
    if not 0.0 <= eta_control <= 1.0:
        raise ProtocolError(f"eta_control must lie in [0, 1], got {eta_control}")
    return _efficiency(
        params, timings.spin_storage, timings.optical_storage, eta_control
    )


@dataclass(frozen=True, eq=False)
class DecayCurve:
    vary: str
    delays: np.ndarray
    efficiency: np.ndarray


@dataclass(frozen=True)
class DecayFit:
    amplitude: float
    gamma: float
    gamma_opt: float = 0.0


def decay_curve(
    params: MaterialParams,
    vary: str,
    grid,
    timings: NlpeTimings = REFERENCE_TIMINGS,
    eta_control: float = 1.0,
) -> DecayCurve:
    """
    Efficiency along a delay grid with the other delay pinned to ``timings``.

    ``tau2`` is t4 - t1; ``tau3`` is 2(t3 - t2), the round trip of the
    optical storage.
    """
    if vary not in DECAY_VARIABLES:
        raise ProtocolError(f"vary must be one of {DECAY_VARIABLES}, got {vary!r}")
    delays = np.asarray(grid, dtype=float)
    if delays.size == 0 or np.any(delays <= 0):
        raise ProtocolError("decay grid must be nonempty and positive")
    if vary == TAU2:
        values = [
            _efficiency(params, tau, timings.optical_storage, eta_control)
            for tau in delays
        ]
    else:
        values = [
            _efficiency(params, timings.spin_storage, tau / 2, eta_control)
            for tau in delays
        ]
    return DecayCurve(vary, delays, np.asarray(values))


# Fits run in μs and kHz so every parameter is of order one.
def _tau2_model(tau_us, amplitude, gamma_khz):
    return amplitude * np.exp(-GAUSSIAN_DEPHASING * 1e-6 * (gamma_khz * tau_us) ** 2)


def _tau3_model(tau_us, amplitude, gamma_khz, gamma_opt_khz):
    half = tau_us / 2
    return amplitude * np.exp(
        -GAUSSIAN_DEPHASING * 1e-6 * (gamma_khz * half) ** 2
        - 2e-3 * gamma_opt_khz * half
    )


def fit_decay(curve: DecayCurve) -> DecayFit:
    """
    Recover the dephasing widths from a decay curve.

    A quadratic fit of log efficiency against delay gives the starting point,
    then curve_fit refines amplitude, Γ (and γ for tau3) with nonnegative
    bounds. Returned rates are in Hz.
    """
    tau_us = curve.delays * 1e6
    values = curve.efficiency
    if np.any(values <= 0):
        raise ProtocolError("decay curve must be strictly positive to fit")
    quad, lin, const = np.polyfit(tau_us, np.log(values), 2)
    amplitude0 = float(np.exp(const))
    if curve.vary == TAU2:
        gamma0 = math.sqrt(max(-quad, 0.0) / (GAUSSIAN_DEPHASING * 1e-6))
        popt, _ = curve_fit(
            _tau2_model,
            tau_us,
            values,
            p0=(amplitude0, gamma0),
            bounds=((0.0, 0.0), (np.inf, np.inf)),
        )
        fit = DecayFit(amplitude=float(popt[0]), gamma=float(popt[1]) * 1e3)
    else:
        gamma0 = math.sqrt(max(-4 * quad, 0.0) / (GAUSSIAN_DEPHASING * 1e-6))
        gamma_opt0 = max(-lin, 0.0) / 1e-3
        popt, _ = curve_fit(
            _tau3_model,
            tau_us,
            values,
            p0=(amplitude0, gamma0, gamma_opt0),
            bounds=((0.0, 0.0, 0.0), (np.inf, np.inf, np.inf)),
        )
        fit = DecayFit(
            amplitude=float(popt[0]),
            gamma=float(popt[1]) * 1e3,
            gamma_opt=float(popt[2]) * 1e3,
        )
    logger.info(
        f"Fitted {curve.vary} decay: Γ = {fit.gamma:.4g} Hz, "
        f"γ = {fit.gamma_opt:.4g} Hz"
    )
    return fit
