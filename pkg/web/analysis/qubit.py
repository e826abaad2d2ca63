"""
End-to-end time-bin qubit storage run.

The retrieval efficiency comes from the closed-form NLPE efficiency at the
qubit timings, times the fraction of the echo captured by one readout bin.
Noise per bin is the filtered echo-window noise of the same storage sequence.
Counts are drawn per input state and per readout phase.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from noisebudget.budget import echo_window_noise
from physmodel.material import MaterialParams
from protocols.efficiency import nlpe_efficiency
from protocols.sequences import (
    DEFAULT_QUBIT_DELAY,
    QUBIT_TIMINGS,
    NlpeTimings,
    PulseDurations,
    build_nlpe,
    build_qubit_readout,
)

from .counting import Histogram, count_histogram
from .fidelity import (
    EARLY,
    INPUT_STATES,
    LATE,
    MIDDLE_BIN,
    READOUT_BINS,
    FidelityReport,
    TimeBinQubit,
    fidelity_report,
    fit_fringe,
    temporal_beamsplitter_readout,
)

logger = logging.getLogger(__name__)

QUBIT_MU = 2.29
QUBIT_ETA_CONTROL = 0.938
PHASE_STEPS = 8


def _intensity_sigma(signal_fwhm: float) -> float:
    # the amplitude FWHM; the intensity is narrower by √2
    return signal_fwhm / (4 * math.sqrt(math.log(2)))


def window_capture(signal_fwhm: float, bin_width: float) -> float:
    """Fraction of a Gaussian echo's energy inside a centred bin."""
    sigma = _intensity_sigma(signal_fwhm)
    return float(erf(bin_width / 2 / (math.sqrt(2) * sigma)))


def echo_bin_fractions(
    edges: np.ndarray, center: float, signal_fwhm: float
) -> np.ndarray:
    """Fraction of a Gaussian echo's energy in each bin of ``edges``."""
    sigma = _intensity_sigma(signal_fwhm)
    scaled = (np.asarray(edges, dtype=float) - center) / (math.sqrt(2) * sigma)
    return np.diff(0.5 * (1.0 + erf(scaled)))


@dataclass(frozen=True, eq=False)
class QubitRun:
    report: FidelityReport
    eta: float
    capture: float
    noise_per_bin: float
    histograms: dict[str, Histogram]
    fringes: dict[str, tuple[np.ndarray, np.ndarray]]


def simulate_qubit_experiment(
    params: MaterialParams | None = None,
    timings: NlpeTimings = QUBIT_TIMINGS,
    mu: float = QUBIT_MU,
    eta_control: float = QUBIT_ETA_CONTROL,
    trials: int = 200_000,
    seed: int = 0,
    delta_t: float = DEFAULT_QUBIT_DELAY,
    phase_steps: int = PHASE_STEPS,
    workers: int | None = None,
) -> QubitRun:
    """
    Store |e⟩, |l⟩, |e⟩+|l⟩ and |e⟩+i|l⟩ and evaluate the average fidelity.

    The basis inputs are read in the outer bins at readout phase zero. The
    superposition inputs sweep the readout phase over ``phase_steps`` points
    of one period, and a sinusoid fitted to the middle-bin counts gives the
    fringe maximum and minimum.
    """
    params = params or MaterialParams()
    durations = PulseDurations()
    readout = build_qubit_readout(timings, delta_t, durations=durations)
    edges = np.array(
        [readout.detection_windows[0].start]
        + [window.stop for window in readout.detection_windows]
    )
    eta = nlpe_efficiency(params, timings, eta_control)
    capture = window_capture(durations.signal_fwhm, delta_t)
    noise = echo_window_noise(build_nlpe(timings), params, eta_control)
    logger.info(
        f"Qubit run: η = {eta:.4f}, capture {capture:.3f}, "
        f"noise {noise:.3g} photons per bin"
    )

    histograms: dict[str, Histogram] = {}
    counts: dict[str, tuple[float, float]] = {}
    for stream, state in enumerate((EARLY, LATE)):
        qubit = TimeBinQubit.for_input(state, mu, delta_t)
        means = temporal_beamsplitter_readout(qubit, 0.0, eta * capture, noise)
        summed = count_histogram(
            np.array([means[label] for label in READOUT_BINS]),
            trials,
            seed,
            stream=stream,
            workers=workers,
        )
        histograms[state] = Histogram(edges, summed, trials, True, mu, eta, seed)
        early, late = float(summed[0]), float(summed[-1])
        counts[state] = (early, late) if state == EARLY else (late, early)

    phases = 2 * math.pi * np.arange(phase_steps) / phase_steps
    fringes = {}
    for offset, state in enumerate(INPUT_STATES[2:]):
        qubit = TimeBinQubit.for_input(state, mu, delta_t)
        fringe = np.empty(phase_steps)
        for step, phase in enumerate(phases):
            means = temporal_beamsplitter_readout(qubit, phase, eta * capture, noise)
            stream = 2 + offset * phase_steps + step
            fringe[step] = count_histogram(
                np.array([means[MIDDLE_BIN]]),
                trials,
                seed,
                stream=stream,
                workers=workers,
            )[0]
        fringes[state] = (phases, fringe)
        counts[state] = fit_fringe(phases, fringe)
        high, low = counts[state]
        logger.debug(f"Fringe of |{state}⟩ runs from {low:.0f} to {high:.0f} counts")

    report = fidelity_report(counts, mu)
    return QubitRun(report, eta, capture, noise, histograms, fringes)
