"""
Rate-equation optical pumping.

A pump sweeps a laser across ``sweep_width`` around ``center`` relative to the
reference-class frequency of ``transition``. Every pass removes the fraction
``transfer`` of the resonant ground level and spreads it over the other ground
levels with fixed redistribution weights. Repeated passes of one pump act in
closed form; a PumpCycle interleaves several pumps pass by pass.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidSchedule, WindowOutsideGrid
from .population import GROUND_LEVELS, SpectralPopulation

logger = logging.getLogger(__name__)

DEFAULT_TRANSFER = 0.5
SCHEDULE_REPETITIONS = 100

# row: pumped level, column: receiving level
UNIFORM_REDISTRIBUTION = (
    (0.0, 0.5, 0.5),
    (0.5, 0.0, 0.5),
    (0.5, 0.5, 0.0),
)


@dataclass(frozen=True)
class Pump:
    transition: str
    center: float = 0.0
    sweep_width: float = 5e6
    repetitions: int = 1

    def __post_init__(self):
        if self.repetitions < 0:
            raise InvalidSchedule(f"repetitions must be >= 0, got {self.repetitions}")
        if not self.sweep_width > 0:
            raise InvalidSchedule(f"sweep width must be positive: {self.sweep_width}")


@dataclass(frozen=True)
class PumpCycle:
    pumps: tuple[Pump, ...]
    repetitions: int = 1
    label: str = ""

    def __post_init__(self):
        if self.repetitions < 0:
            raise InvalidSchedule(f"repetitions must be >= 0, got {self.repetitions}")


@dataclass(frozen=True)
class PumpSettings:
    transfer: float = DEFAULT_TRANSFER
    redistribution: tuple[tuple[float, ...], ...] = UNIFORM_REDISTRIBUTION

    def __post_init__(self):
        if not 0.0 < self.transfer <= 1.0:
            raise InvalidSchedule(f"transfer must lie in (0, 1], got {self.transfer}")
        matrix = np.asarray(self.redistribution, dtype=float)
        size = len(GROUND_LEVELS)
        if matrix.shape != (size, size):
            raise InvalidSchedule(f"redistribution must be {size}x{size}")
        if np.any(matrix < 0) or np.any(np.diag(matrix) != 0):
            raise InvalidSchedule("redistribution needs weights >= 0, zero diagonal")
        if not np.allclose(matrix.sum(axis=1), 1.0):
            raise InvalidSchedule("redistribution rows must sum to one")

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.redistribution, dtype=float)


CLASS_CLEANING = PumpCycle(
    tuple(Pump(t, 0.0, 5e6) for t in ("f15", "f35", "f13", "f53")),
    SCHEDULE_REPETITIONS,
    "class cleaning",
)
SPIN_POLARIZATION = PumpCycle(
    (Pump("f15", 0.0, 5e6), Pump("f35", 0.0, 5e6)),
    SCHEDULE_REPETITIONS,
    "spin polarization",
)
BACKPUMP = PumpCycle(
    (Pump("f53", 0.0, 700e3), Pump("f35", 0.0, 700e3)),
    SCHEDULE_REPETITIONS,
    "backpump",
)
MEMORY_SCHEDULE = (CLASS_CLEANING, SPIN_POLARIZATION, BACKPUMP)
FILTER_SCHEDULE = (
    PumpCycle((Pump("f15", 0.0, 1e6),), SCHEDULE_REPETITIONS, "filter hole"),
)


def _check_window(pop: SpectralPopulation, pump: Pump) -> None:
    low = pump.center - pump.sweep_width / 2
    high = pump.center + pump.sweep_width / 2
    slack = 1e-6 * pop.step
    if low < pop.grid[0] - slack or high > pop.grid[-1] + slack:
        raise WindowOutsideGrid(
            f"{pump.transition} sweep [{low:.4g}, {high:.4g}] Hz leaves the grid "
            f"[{pop.grid[0]:.4g}, {pop.grid[-1]:.4g}] Hz"
        )


def pump_step(
    pop: SpectralPopulation, pump: Pump, settings: PumpSettings | None = None
) -> SpectralPopulation:
    """
    Apply ``pump.repetitions`` passes of one pump.

    Raises:
        WindowOutsideGrid: the sweep leaves the frequency grid
        UnknownTransition: the pump addresses no preparation transition
    """
    settings = settings or PumpSettings()
    _check_window(pop, pump)
    resonances = pop.table.resonances(pump.transition, pop.step / 2)
    if pump.repetitions == 0 or not resonances:
        return pop

    mask = pop.window(pump.center, pump.sweep_width)
    weights = settings.matrix
    density = pop.density.copy()
    by_class: dict[int, list[int]] = {}
    for class_index, level in resonances:
        by_class.setdefault(class_index, []).append(level)

    for class_index, levels in by_class.items():
        block = density[class_index][:, mask]
        if len(levels) == 1:
            level = levels[0]
            kept = (1.0 - settings.transfer) ** pump.repetitions
            moved = block[level] * (1.0 - kept)
            block[level] -= moved
            block += np.outer(weights[level], moved)
        else:
            for _ in range(pump.repetitions):
                for level in levels:
                    moved = settings.transfer * block[level]
                    block[level] -= moved
                    block += np.outer(weights[level], moved)
        density[class_index][:, mask] = block
    return pop.evolve(density)


def run_preparation(
    initial: SpectralPopulation,
    schedule: Iterable[Pump | PumpCycle],
    settings: PumpSettings | None = None,
) -> SpectralPopulation:
    """Apply pumps and pump cycles in order."""
    pop = initial
    for step in schedule:
        if isinstance(step, Pump):
            pop = pump_step(pop, step, settings)
            continue
        for _ in range(step.repetitions):
            for pump in step.pumps:
                pop = pump_step(pop, pump, settings)
        logger.info(
            f"Finished {step.label or 'pump cycle'}: {step.repetitions} x "
            f"{[p.transition for p in step.pumps]}"
        )
    drift = abs(pop.total - initial.total)
    if drift > 1e-9 * initial.total:
        logger.warning(f"Preparation changed the total population by {drift:.3g}")
    return pop
