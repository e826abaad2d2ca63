"""
Spontaneous-emission noise per detection window.

An excited population p radiates about p·(e^d − 1) photons into one
temporal-spatial mode of a medium of depth d; one mode is one detection window.
Emission from e3 sits on f13/f33 and is absorbed by the filter crystal
(e^{-d_fc}); emission from e5 sits on f15, the echo frequency, and passes the
filter untouched.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from physmodel.levels import BASIS
from physmodel.material import MaterialParams
from protocols.sequences import ECHO_WINDOW, Sequence

from .exceptions import BranchingUnreachable, NoiseBudgetError, ZeroNoise
from .traces import PopulationTrace, population_trace

logger = logging.getLogger(__name__)

RESIDUAL_NOISE_TARGET = 1.5e-3

FILTERABLE_CHANNEL = "f13"
ECHO_CHANNEL = "f15"
DETECTOR = "detector"

_SOURCES = (("e3", FILTERABLE_CHANNEL), ("e5", ECHO_CHANNEL))


@dataclass(frozen=True)
class NoiseEntry:
    window: str
    source: str
    channel: str
    before_filter: float
    after_filter: float

    @property
    def filterable(self) -> bool:
        return self.channel == FILTERABLE_CHANNEL


@dataclass(frozen=True)
class NoiseBudget:
    entries: tuple[NoiseEntry, ...]

    @property
    def windows(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(entry.window for entry in self.entries))

    def entries_for(self, window: str) -> tuple[NoiseEntry, ...]:
        found = tuple(entry for entry in self.entries if entry.window == window)
        if not found:
            raise NoiseBudgetError(f"no budget entries for window {window!r}")
        return found

    def total(self, window: str, filtered: bool = True) -> float:
        entries = self.entries_for(window)
        if filtered:
            return float(sum(entry.after_filter for entry in entries))
        return float(sum(entry.before_filter for entry in entries))

    def to_dict(self) -> dict[str, dict]:
        return {
            window: {
                "entries": [asdict(entry) for entry in self.entries_for(window)],
                "before_filter": self.total(window, filtered=False),
                "after_filter": self.total(window),
            }
            for window in self.windows
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def inverted_medium_noise(d_inverted: float) -> float:
    """Photons per mode emitted by a fully inverted medium of depth ``d_inverted``."""
    if d_inverted < 0:
        raise ValueError(f"depth must be nonnegative, got {d_inverted}")
    return math.expm1(d_inverted)


def filtered_noise(n: float, d_fc: float) -> float:
    if n < 0:
        raise ValueError(f"photon number must be nonnegative, got {n}")
    return n * math.exp(-d_fc)


def window_noise(
    seq: Sequence,
    trace: PopulationTrace,
    params: MaterialParams,
    dark_counts: float = 0.0,
) -> NoiseBudget:
    """
    Noise budget of every detection window of ``seq``.

    Populations are read at the window centers of ``trace``. Detector dark
    counts are booked as their own entry; the filter does not act on them.

    Raises:
        MissingPopulationTrace: the trace has no snapshot for a window
    """
    if dark_counts < 0:
        raise ValueError(f"dark counts must be nonnegative, got {dark_counts}")
    per_mode = inverted_medium_noise(params.d)
    entries = []
    for window in seq.detection_windows:
        populations = trace.at(window.label)
        for source, channel in _SOURCES:
            population = max(float(populations[BASIS.index(source)]), 0.0)
            before = population * per_mode
            after = before
            if channel == FILTERABLE_CHANNEL:
                after = filtered_noise(before, params.d_fc)
            entries.append(NoiseEntry(window.label, source, channel, before, after))
        if dark_counts:
            entries.append(
                NoiseEntry(window.label, "dark", DETECTOR, dark_counts, dark_counts)
            )
    budget = NoiseBudget(tuple(entries))
    for label in budget.windows:
        logger.debug(f"Noise in {label}: {budget.total(label):.3g} photons per trial")
    return budget


def echo_window_noise(
    seq: Sequence,
    params: MaterialParams,
    eta_control: float = 1.0,
    label: str = ECHO_WINDOW,
    dark_counts: float = 0.0,
) -> float:
    """Filtered noise in one window using the rate-bookkeeping trace."""
    trace = population_trace(seq, params, eta_control)
    return window_noise(seq, trace, params, dark_counts).total(label)


def calibrate_branching(
    seq: Sequence,
    params: MaterialParams,
    eta_control: float = 1.0,
    target: float = RESIDUAL_NOISE_TARGET,
    label: str = ECHO_WINDOW,
) -> float:
    """
    Branching fraction e3 → g3 that puts ``target`` photons in window ``label``.

    The window noise is linear in the branching fraction, so two evaluations
    fix it exactly.

    Raises:
        BranchingUnreachable: the target needs a fraction outside [0, 1]
    """
    without = params.with_changes(branching_e3_to_g3=0.0)
    every = params.with_changes(branching_e3_to_g3=1.0)
    base = echo_window_noise(seq, without, eta_control, label)
    full = echo_window_noise(seq, every, eta_control, label)
    slope = full - base
    if slope <= 0:
        raise BranchingUnreachable(
            f"noise in {label} does not depend on the branching fraction"
        )
    branching = (target - base) / slope
    if not 0.0 <= branching <= 1.0:
        raise BranchingUnreachable(
            f"target {target:.3g} needs branching {branching:.3g}, outside [0, 1]"
        )
    logger.info(
        f"Calibrated branching e3->g3 = {branching:.4f} for {target:.3g} photons"
    )
    return branching


def snr(signal_counts: int | float, noise_counts: int | float) -> float:
    """
    Signal-to-noise ratio S/N.

    Raises:
        ZeroNoise: ``noise_counts`` is zero
    """
    if noise_counts < 0 or signal_counts < 0:
        raise ValueError("counts must be nonnegative")
    if noise_counts == 0:
        raise ZeroNoise("signal-to-noise ratio of a noiseless window")
    return signal_counts / noise_counts


def safe_snr(signal_counts: int | float, noise_counts: int | float) -> float:
    """Like :func:`snr` but returns ``ZeroNoise.marker`` for a noiseless window."""
    try:
        return snr(signal_counts, noise_counts)
    except ZeroNoise:
        return ZeroNoise.marker


def residual_inversion(eta_control: float) -> float:
    """Population left inverted by two π pulses of transfer efficiency η."""
    return float(np.clip(1.0 - (2.0 * eta_control - 1.0) ** 2, 0.0, 1.0))


@dataclass(frozen=True)
class NoiseComparison:
    rose_noise: float
    nlpe_noise: float
    ratio: float
    rose_channel: str = ECHO_CHANNEL
    nlpe_channel: str = FILTERABLE_CHANNEL

    @property
    def rose_filterable(self) -> bool:
        return self.rose_channel == FILTERABLE_CHANNEL

    @property
    def nlpe_filterable(self) -> bool:
        return self.nlpe_channel == FILTERABLE_CHANNEL


def rose_noise_comparison(
    params: MaterialParams,
    residual: float,
    seq: Sequence,
    eta_control: float = 1.0,
) -> NoiseComparison:
    """
    Compare ROSE noise with the NLPE echo-window noise of ``seq``.

    ROSE re-emits from the residual inversion on the signal transition itself,
    so none of it can be filtered. The NLPE side is the filtered echo-window
    total; its dominant inverted population sits on f13.
    """
    if not 0.0 <= residual <= 1.0:
        raise ValueError(f"residual inversion must lie in [0, 1], got {residual}")
    rose = residual * inverted_medium_noise(params.d)
    nlpe = echo_window_noise(seq, params, eta_control)
    ratio = safe_snr(rose, nlpe)
    logger.info(
        f"ROSE noise {rose:.3g} vs NLPE noise {nlpe:.3g} photons (ratio {ratio:.3g})"
    )
    return NoiseComparison(rose, nlpe, ratio)
