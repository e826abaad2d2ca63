"""
Ensemble-mean level populations along a sequence.

A trace is a list of labelled snapshots of the populations of (g1, g3, e3,
e5). Two producers exist: the Monte-Carlo engine (ionensemble.engine) records
one snapshot per pulse center and per window center, and population_trace
below evaluates the same quantities by rate bookkeeping.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from physmodel.levels import BASIS, LevelScheme
from physmodel.material import MaterialParams
from protocols.sequences import Sequence
from pulseshape.shapes import SIGNAL

from .exceptions import MissingPopulationTrace

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PopulationTrace:
    times: np.ndarray
    labels: tuple[str, ...]
    populations: np.ndarray

    def __post_init__(self):
        populations = np.asarray(self.populations, dtype=float).reshape(-1, len(BASIS))
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "populations", populations)
        if not len(self.labels) == populations.shape[0] == self.times.size:
            raise ValueError("trace times, labels and populations must align")

    def covers(self, label: str) -> bool:
        return label in self.labels

    def at(self, label: str) -> np.ndarray:
        if label not in self.labels:
            raise MissingPopulationTrace(f"no population snapshot for {label!r}")
        return self.populations[self.labels.index(label)]

    def level(self, label: str, level: str) -> float:
        return float(self.at(label)[BASIS.index(level)])


def pulse_label(index: int, transition: str) -> str:
    return f"pulse{index}:{transition}"


def _relax(populations: np.ndarray, dt: float, params: MaterialParams) -> np.ndarray:
    """Excited-state decay over ``dt``; a fraction of e3 decay refills g3."""
    if dt <= 0:
        return populations
    survive = math.exp(-dt / params.t1_excited)
    g1, g3, e3, e5 = populations
    leaked = e3 * (1.0 - survive)
    return np.array(
        [g1, g3 + params.branching_e3_to_g3 * leaked, e3 * survive, e5 * survive]
    )


def population_trace(
    seq: Sequence,
    params: MaterialParams,
    eta_control: float = 1.0,
    scheme: LevelScheme | None = None,
) -> PopulationTrace:
    """
    Rate-bookkeeping populations for every pulse center and window center.

    Every ion starts in g1. A control pulse of area A swaps the fraction
    η·sin²(A/2) of the populations of its pair; signal pulses are weak and
    leave populations alone. Between events excited levels decay with T1.
    """
    scheme = scheme or LevelScheme.default()
    events: list[tuple[float, str, object]] = []
    for index, pulse in enumerate(seq.pulses):
        events.append((pulse.center_time, pulse_label(index, pulse.transition), pulse))
    for window in seq.detection_windows:
        events.append((window.center, window.label, None))
    events.sort(key=lambda event: event[0])

    populations = np.array([1.0, 0.0, 0.0, 0.0])
    now = events[0][0] if events else 0.0
    times, labels, snapshots = [], [], []
    for time, label, pulse in events:
        populations = _relax(populations, time - now, params)
        now = time
        if pulse is not None and pulse.role != SIGNAL:
            lower, upper = scheme.pair(pulse.transition)
            swap = eta_control * math.sin(pulse.nominal_area / 2) ** 2
            moved_up = swap * populations[lower]
            moved_down = swap * populations[upper]
            populations = populations.copy()
            populations[lower] += moved_down - moved_up
            populations[upper] += moved_up - moved_down
        times.append(time)
        labels.append(label)
        snapshots.append(populations.copy())
    logger.debug(f"Rate-equation trace with {len(labels)} snapshots")
    return PopulationTrace(np.array(times), tuple(labels), np.array(snapshots))
