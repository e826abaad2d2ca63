"""
Macroscopic emission from the ion coherences.

The field radiated on a transition is the phase-matched sum of the optical
coherences, Σ_j ρ_j(upper, lower) e^{-i k_det·r_j}, propagated analytically
across the detection grid. Its scale is fixed by the signal itself: the
free-induction field F(s) of the stored signal coherence, integrated over the
signal support, is assigned the energy d²e^{-d}, so an echo that perfectly
restores the signal carries exactly the forward echo efficiency.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from physmodel.material import MaterialParams

from .dynamics import E3, free_evolution, spatial_phase
from .ensemble import Ensemble
from .exceptions import EmptyWindow

logger = logging.getLogger(__name__)

DEFAULT_GRID_STEP = 20e-9
CHUNK_SIZE = 4096
CSV_HEADER = ("time", "Re", "Im", "intensity")


@dataclass(frozen=True, eq=False)
class EmissionRecord:
    label: str
    transition: str
    times: np.ndarray
    amplitude: np.ndarray

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    @property
    def integrated_intensity(self) -> float:
        """Energy in the window, in units of the input signal energy."""
        return float(trapezoid(self.intensity, self.times))

    @property
    def peak_time(self) -> float:
        return float(self.times[int(np.argmax(self.intensity))])

    def write_csv(self, handle) -> None:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t, value, power in zip(self.times, self.amplitude, self.intensity):
            writer.writerow(
                (
                    repr(float(t)),
                    repr(float(value.real)),
                    repr(float(value.imag)),
                    repr(float(power)),
                )
            )

    def to_csv(self, path: Path | str) -> Path:
        path = Path(path)
        with path.open("w", newline="") as handle:
            self.write_csv(handle)
        return path


def time_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Uniform grid from ``start`` covering [start, stop] with spacing ``step``."""
    if not stop > start or not step > 0:
        raise EmptyWindow(f"window [{start}, {stop}] with step {step} holds no grid")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count < 2:
        raise EmptyWindow(
            f"window [{start}, {stop}] is shorter than one grid step of {step} s"
        )
    return start + step * np.arange(count)


def optical_decay_rate(params: MaterialParams, upper: int) -> float:
    gamma = params.gamma_opt if upper == E3 else 0.0
    return gamma + 1.0 / (2 * params.t1_excited)


def coherence_sum(
    ens: Ensemble,
    lower: int,
    upper: int,
    detect_direction: tuple[float, float],
    offsets: np.ndarray,
    params: MaterialParams,
) -> np.ndarray:
    """
    Σ_j ρ_j(upper, lower) e^{-i k_det·r_j} at ``ens.time + offsets``.

    Unnormalized, so sums over disjoint sets of ions add.
    """
    total = np.zeros(offsets.size, dtype=complex)
    decay = np.exp(-optical_decay_rate(params, upper) * offsets)
    for start in range(0, ens.n, CHUNK_SIZE):
        part = ens.slice(start, min(start + CHUNK_SIZE, ens.n))
        weights = part.rho[:, upper, lower] * np.exp(
            -1j * spatial_phase(part, detect_direction)
        )
        detunings = part.pair_detunings(lower, upper)
        phases = np.exp(-2j * math.pi * np.outer(detunings, offsets))
        total += weights @ phases
    return total * decay


def reference_offsets(ens: Ensemble, step: float) -> np.ndarray:
    span = ens.reference_span
    count = int(math.floor(2 * span / step + 1e-9)) + 1
    return -span + step * np.arange(max(count, 2))


def reference_sum(ens: Ensemble, offsets: np.ndarray) -> np.ndarray:
    """Σ_j c̃_j e^{-i2πΔ_j s}: the free-induction field of the stored signal."""
    total = np.zeros(offsets.size, dtype=complex)
    if ens.reference is None:
        return total
    for start in range(0, ens.n, CHUNK_SIZE):
        stop = min(start + CHUNK_SIZE, ens.n)
        detunings = ens.reference_detunings[start:stop]
        phases = np.exp(-2j * math.pi * np.outer(detunings, offsets))
        total += ens.reference[start:stop] @ phases
    return total


def calibration_scale(
    reference: np.ndarray, offsets: np.ndarray, n: int, params: MaterialParams
) -> float:
    """Factor turning a raw coherence sum into an amplitude in signal units."""
    energy = float(trapezoid(np.abs(reference / n) ** 2, offsets))
    if energy <= 0:
        return 0.0
    return math.sqrt(params.d**2 * math.exp(-params.d) / energy) / n


def emitted_field(
    ens: Ensemble,
    transition: str,
    detect_direction: tuple[float, float],
    window: tuple[float, float],
    grid_step: float,
    params: MaterialParams,
    label: str = "",
) -> EmissionRecord:
    """
    Emission on ``transition`` along ``detect_direction`` during ``window``.

    The ensemble is first evolved freely to the window start. Without a stored
    signal reference the record is identically zero.

    Raises:
        EmptyWindow: if the window holds fewer than two grid points
    """
    start, stop = window
    times = time_grid(start, stop, grid_step)
    lower, upper = ens.scheme.pair(transition)
    at_start = free_evolution(ens, start - ens.time, params)
    raw = coherence_sum(at_start, lower, upper, detect_direction, times - start, params)
    offsets = reference_offsets(ens, grid_step)
    scale = calibration_scale(reference_sum(ens, offsets), offsets, ens.n, params)
    if scale == 0.0:
        logger.debug(f"No signal reference stored; emission on {transition} is zero")
    return EmissionRecord(label, transition, times, raw * scale)
