"""
Ground-level populations of the ion classes over a laser-frequency grid.

The optical line is far wider than the hyperfine splittings, so at any laser
frequency several classes of ions absorb, each through a different hyperfine
transition. A class is named by the transition that sits at the laser
reference frequency; the grid variable of a class is the detuning of that
transition. Ions have three ground levels, g1 and g3 of the memory scheme plus
the reservoir g5, and two excited levels e3 and e5.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from physmodel.levels import LevelScheme
from physmodel.material import MaterialParams

from .exceptions import SpecPrepError, UnknownTransition

logger = logging.getLogger(__name__)

GROUND_LEVELS = ("g1", "g3", "g5")
TRANSITIONS = {
    "f15": ("g1", "e5"),
    "f35": ("g3", "e5"),
    "f55": ("g5", "e5"),
    "f13": ("g1", "e3"),
    "f33": ("g3", "e3"),
    "f53": ("g5", "e3"),
}

DEFAULT_HALF_SPAN = 10e6
DEFAULT_GRID_STEP = 25e3


@dataclass(frozen=True)
class ClassTable:
    """Transition frequencies relative to f15, in Hz, built from level energies."""

    offsets: tuple[tuple[str, float], ...]

    @classmethod
    def from_scheme(
        cls, scheme: LevelScheme, reservoir_splitting: float
    ) -> "ClassTable":
        ground = {
            "g1": 0.0,
            "g3": scheme.ground_splitting,
            "g5": scheme.ground_splitting + reservoir_splitting,
        }
        excited = {"e5": 0.0, "e3": -scheme.excited_splitting}
        return cls(
            tuple(
                (name, excited[upper] - ground[lower])
                for name, (lower, upper) in TRANSITIONS.items()
            )
        )

    @classmethod
    def default(cls, params: MaterialParams | None = None) -> "ClassTable":
        params = params or MaterialParams()
        return cls.from_scheme(LevelScheme.default(), params.reservoir_splitting)

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.offsets)

    def offset(self, transition: str) -> float:
        for name, value in self.offsets:
            if name == transition:
                return value
        raise UnknownTransition(f"{transition!r} is not a preparation transition")

    def resonances(self, transition: str, tolerance: float) -> list[tuple[int, int]]:
        """
        (class index, ground level index) pairs addressed by a laser at ``transition``.

        A laser tuned to ``transition`` of the reference class reaches class c
        through every transition whose frequency, shifted by the class offset,
        coincides with it. Coincidences off by more than ``tolerance`` fall
        outside the simulated window and are ignored.
        """
        laser = self.offset(transition)
        found = []
        for index, (name, class_offset) in enumerate(self.offsets):
            for other, other_offset in self.offsets:
                if abs(other_offset - class_offset - laser) <= tolerance:
                    lower = TRANSITIONS[other][0]
                    found.append((index, GROUND_LEVELS.index(lower)))
        return found


@dataclass(frozen=True, eq=False)
class SpectralPopulation:
    """
    Population density per class, ground level and grid point.

    ``density`` has shape (classes, 3, grid). The densities of one class sum
    to its weight; pumping only moves population between the levels of one
    class at one grid point.
    """

    grid: np.ndarray
    density: np.ndarray
    table: ClassTable

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        density = np.asarray(self.density, dtype=float)
        expected = (len(self.table.classes), len(GROUND_LEVELS), grid.size)
        if density.shape != expected:
            raise SpecPrepError(f"density shape {density.shape} != {expected}")
        if grid.size < 2 or not np.allclose(np.diff(grid), grid[1] - grid[0]):
            raise SpecPrepError("the frequency grid must be uniform")
        if np.any(density < 0):
            raise SpecPrepError("population densities must be nonnegative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", density)

    @classmethod
    def unprepared(
        cls,
        table: ClassTable | None = None,
        half_span: float = DEFAULT_HALF_SPAN,
        step: float = DEFAULT_GRID_STEP,
    ) -> "SpectralPopulation":
        """Equal class weights, thermal ground levels, flat over the grid."""
        table = table or ClassTable.default()
        points = int(round(2 * half_span / step)) + 1
        grid = np.linspace(-half_span, half_span, points)
        n_classes = len(table.classes)
        density = np.full(
            (n_classes, len(GROUND_LEVELS), points),
            1.0 / (n_classes * len(GROUND_LEVELS) * points),
        )
        logger.debug(f"Unprepared population: {n_classes} classes, {points} points")
        return cls(grid, density, table)

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def total(self) -> float:
        return float(self.density.sum())

    def class_index(self, name: str) -> int:
        return self.table.classes.index(name)

    def class_weights(self) -> np.ndarray:
        return self.density.sum(axis=(1, 2))

    def level(self, class_name: str, level: str) -> np.ndarray:
        return self.density[self.class_index(class_name), GROUND_LEVELS.index(level)]

    def window(self, center: float, width: float) -> np.ndarray:
        """Boolean mask of grid points within ``width / 2`` of ``center``."""
        return np.abs(self.grid - center) <= width / 2 + 1e-6 * self.step

    def evolve(self, density: np.ndarray) -> "SpectralPopulation":
        return replace(self, density=density)
