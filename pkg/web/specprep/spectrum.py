"""
Absorption spectra of a prepared population.

Depths are relative to the unprepared medium: a population that was never
pumped absorbs ``calibration`` at every grid point. The homogeneous line is a
Lorentzian of the laser linewidth, integrated over each grid cell.
"""

import csv
import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from physmodel.material import MaterialParams
from physmodel.spectra import SpectralProfile

from .exceptions import SpecPrepError
from .population import GROUND_LEVELS, ClassTable, SpectralPopulation
from .pumping import FILTER_SCHEDULE, MEMORY_SCHEDULE, PumpSettings, run_preparation

logger = logging.getLogger(__name__)

LASER_LINEWIDTH = 1e3
PROBE_TRANSITION = "f15"
TARGET_PEAK_DEPTH = 0.6
CSV_HEADER = ("frequency", "d")


def lorentzian_kernel(step: float, fwhm: float, points: int) -> np.ndarray:
    """Cell-integrated Lorentzian on offsets -(points-1)..(points-1) steps."""
    offsets = step * np.arange(-(points - 1), points)
    half = fwhm / 2
    upper = np.arctan((offsets + step / 2) / half)
    lower = np.arctan((offsets - step / 2) / half)
    return (upper - lower) / math.pi


def _relative_absorption(pop: SpectralPopulation, transition: str) -> np.ndarray:
    resonances = pop.table.resonances(transition, pop.step / 2)
    if not resonances:
        raise SpecPrepError(f"no ion class absorbs at {transition}")
    weights = pop.class_weights()
    absorbing = np.zeros(pop.grid.size)
    unprepared = 0.0
    for class_index, level in resonances:
        absorbing += pop.density[class_index, level]
        unprepared += weights[class_index] / (len(GROUND_LEVELS) * pop.grid.size)
    if unprepared <= 0:
        raise SpecPrepError(f"the classes absorbing at {transition} hold no ions")
    return absorbing / unprepared


def absorption_spectrum(
    pop: SpectralPopulation,
    transition: str,
    calibration: float,
    linewidth: float = LASER_LINEWIDTH,
) -> np.ndarray:
    """
    Absorption depth d(ν) over the grid, probing around ``transition``.

    Raises:
        SpecPrepError: the calibration is not positive or no class absorbs
    """
    if not calibration > 0:
        raise SpecPrepError(f"calibration must be positive, got {calibration}")
    relative = _relative_absorption(pop, transition)
    if linewidth > 0:
        kernel = lorentzian_kernel(pop.step, linewidth, pop.grid.size)
        weight = fftconvolve(np.ones_like(relative), kernel, mode="same")
        relative = fftconvolve(relative, kernel, mode="same") / weight
    return calibration * np.clip(relative, 0.0, None)


def calibrate_peak_depth(
    pop: SpectralPopulation,
    transition: str = PROBE_TRANSITION,
    target: float = TARGET_PEAK_DEPTH,
    linewidth: float = LASER_LINEWIDTH,
) -> float:
    """Calibration that makes the highest point of the spectrum equal ``target``."""
    peak = float(absorption_spectrum(pop, transition, 1.0, linewidth).max())
    if peak <= 0:
        raise SpecPrepError(f"nothing absorbs at {transition} after preparation")
    return target / peak


def class_activity(
    pop: SpectralPopulation,
    transitions: Iterable[str],
    width: float,
    center: float = 0.0,
) -> dict[str, float]:
    """Population of each class resonant with any of the laser ``transitions``."""
    mask = pop.window(center, width)
    resonant = np.zeros(pop.density.shape, dtype=bool)
    for transition in transitions:
        for class_index, level in pop.table.resonances(transition, pop.step / 2):
            resonant[class_index, level] |= mask
    totals = np.where(resonant, pop.density, 0.0).sum(axis=(1, 2))
    return {name: float(total) for name, total in zip(pop.table.classes, totals)}


def profile_from_spectrum(
    grid: np.ndarray, depth: np.ndarray, window: tuple[float, float] | None = None
) -> SpectralProfile:
    """Detuning distribution of the absorbing ions, for the ensemble sampler."""
    return SpectralProfile.from_density(grid, depth, window)


def spectrum_to_csv(grid: np.ndarray, depth: np.ndarray, path: Path | str) -> Path:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for frequency, value in zip(grid, depth):
            writer.writerow((repr(float(frequency)), repr(float(value))))
    return path


@dataclass(frozen=True, eq=False)
class PreparedSpectrum:
    population: SpectralPopulation
    depth: np.ndarray
    calibration: float

    @property
    def grid(self) -> np.ndarray:
        return self.population.grid

    @property
    def peak_depth(self) -> float:
        return float(self.depth.max())

    def profile(self, window: tuple[float, float] | None = None) -> SpectralProfile:
        return profile_from_spectrum(self.grid, self.depth, window)

    def to_csv(self, path: Path | str) -> Path:
        return spectrum_to_csv(self.grid, self.depth, path)


def prepare_memory(
    params: MaterialParams | None = None,
    table: ClassTable | None = None,
    settings: PumpSettings | None = None,
    linewidth: float = LASER_LINEWIDTH,
) -> PreparedSpectrum:
    """Class cleaning, spin polarization and backpump, scaled to a peak depth d."""
    params = params or MaterialParams()
    table = table or ClassTable.default(params)
    initial = SpectralPopulation.unprepared(table)
    pop = run_preparation(initial, MEMORY_SCHEDULE, settings)
    calibration = calibrate_peak_depth(pop, PROBE_TRANSITION, params.d, linewidth)
    depth = absorption_spectrum(pop, PROBE_TRANSITION, calibration, linewidth)
    logger.info(
        f"Prepared memory peak d = {depth.max():.3g} (calibration {calibration:.4g})"
    )
    return PreparedSpectrum(pop, depth, calibration)


def prepare_filter(
    params: MaterialParams | None = None,
    table: ClassTable | None = None,
    settings: PumpSettings | None = None,
    linewidth: float = LASER_LINEWIDTH,
) -> PreparedSpectrum:
    """Transparency window burnt at f15 into a filter crystal of depth d_fc."""
    params = params or MaterialParams()
    table = table or ClassTable.default(params)
    initial = SpectralPopulation.unprepared(table)
    pop = run_preparation(initial, FILTER_SCHEDULE, settings)
    depth = absorption_spectrum(pop, PROBE_TRANSITION, params.d_fc, linewidth)
    return PreparedSpectrum(pop, depth, params.d_fc)
