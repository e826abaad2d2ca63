"""
Run a Sequence over an ensemble.

Ions are processed in fixed blocks. Each block walks the pulses and windows in
time order and returns unnormalized sums: the coherence sum of every window,
the signal reference and the level populations at every event. Sums are
combined with a fixed pairwise tree, so the result does not depend on the
number of worker threads.
"""

import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from echo_lab.streams import block_bounds, map_blocks, tree_reduce
from noisebudget.traces import PopulationTrace, pulse_label
from physmodel.material import MaterialParams
from protocols.sequences import DetectionWindow, Sequence
from pulseshape.shapes import SIGNAL, PulseSpec

from .dynamics import TransferTable, apply_pulse, free_evolution, is_exact
from .emission import (
    DEFAULT_GRID_STEP,
    EmissionRecord,
    calibration_scale,
    coherence_sum,
    reference_offsets,
    reference_sum,
    time_grid,
)
from .ensemble import Ensemble
from .sampling import ION_BLOCK_SIZE

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RunResult:
    records: dict[str, EmissionRecord]
    trace: PopulationTrace

    def record(self, label: str) -> EmissionRecord:
        return self.records[label]


@dataclass(frozen=True, eq=False)
class _BlockSums:
    emission: dict[str, np.ndarray]
    reference: np.ndarray
    populations: np.ndarray


def _combine(a: _BlockSums, b: _BlockSums) -> _BlockSums:
    return _BlockSums(
        {label: a.emission[label] + b.emission[label] for label in a.emission},
        a.reference + b.reference,
        a.populations + b.populations,
    )


def _events(seq: Sequence) -> list[tuple[float, str, PulseSpec | DetectionWindow]]:
    events: list[tuple[float, str, PulseSpec | DetectionWindow]] = [
        (pulse.center_time, pulse_label(i, pulse.transition), pulse)
        for i, pulse in enumerate(seq.pulses)
    ]
    events += [(w.start, w.label, w) for w in seq.detection_windows]
    events.sort(key=lambda event: event[0])
    return events


def propagate_sequence(
    ens: Ensemble,
    seq: Sequence,
    params: MaterialParams,
    until: float | None = None,
    tables: dict[int, TransferTable] | None = None,
) -> Ensemble:
    """Apply every pulse of ``seq`` in order, then evolve freely to ``until``."""
    tables = tables or {}
    for index, pulse in enumerate(seq.pulses):
        ens = free_evolution(ens, pulse.center_time - ens.time, params)
        ens = apply_pulse(ens, pulse, tables.get(index))
    if until is not None:
        ens = free_evolution(ens, until - ens.time, params)
    return ens


def _signal_span(ens: Ensemble, seq: Sequence) -> float:
    if ens.reference is not None:
        return ens.reference_span
    for pulse in seq.pulses:
        if pulse.role == SIGNAL:
            return pulse.half_support
    return 0.0


def run_sequence(
    ens: Ensemble,
    seq: Sequence,
    params: MaterialParams,
    grid_step: float = DEFAULT_GRID_STEP,
    workers: int | None = None,
    block_size: int = ION_BLOCK_SIZE,
) -> RunResult:
    """
    Interleave pulses and free evolution, recording emission in every window.

    Args:
        ens: Starting ensemble; its time must not be later than the first event
        seq: Pulses and detection windows
        params: Material constants for decay and calibration
        grid_step: Spacing of the emission grid (s)
        workers: Thread count, defaults to ``settings.ECHO_LAB_THREADS``
        block_size: Ions per block

    Raises:
        OverlappingPulses: a window intersects a pulse support
        UnknownTransition: a pulse or window addresses a missing transition
        EmptyWindow: a window holds fewer than two grid points
    """
    seq.check_windows()
    workers = workers or settings.ECHO_LAB_THREADS
    events = _events(seq)
    if events and events[0][0] < ens.time:
        raise ValueError(
            f"sequence starts at {events[0][0]} before the ensemble time {ens.time}"
        )

    pairs = {w.label: ens.scheme.pair(w.transition) for w in seq.detection_windows}
    grids = {
        w.label: time_grid(w.start, w.stop, grid_step) for w in seq.detection_windows
    }
    tables = {
        index: TransferTable.for_ensemble(pulse, ens)
        for index, pulse in enumerate(seq.pulses)
        if not is_exact(pulse)
    }
    ens = ens.evolve(reference_span=_signal_span(ens, seq))
    offsets = reference_offsets(ens, grid_step)
    bounds = block_bounds(ens.n, block_size)

    def run_block(block: int) -> _BlockSums:
        start, stop = bounds[block]
        part = ens.slice(start, stop)
        emission = {}
        populations = []
        pulse_index = 0
        for time, label, item in events:
            part = free_evolution(part, time - part.time, params)
            if isinstance(item, DetectionWindow):
                lower, upper = pairs[label]
                emission[label] = coherence_sum(
                    part, lower, upper, item.direction, grids[label] - time, params
                )
                center = free_evolution(part, item.width / 2, params)
                populations.append(center.population_sums())
            else:
                part = apply_pulse(part, item, tables.get(pulse_index))
                pulse_index += 1
                populations.append(part.population_sums())
        return _BlockSums(
            emission,
            reference_sum(part, offsets),
            np.array(populations).reshape(len(events), 4),
        )

    logger.info(
        f"Running {seq.protocol_tag} sequence on {ens.n} ions in {len(bounds)} blocks "
        f"with {workers} worker(s)"
    )
    totals = tree_reduce(map_blocks(run_block, len(bounds), workers), _combine)

    scale = calibration_scale(totals.reference, offsets, ens.n, params)
    records = {
        w.label: EmissionRecord(
            w.label, w.transition, grids[w.label], totals.emission[w.label] * scale
        )
        for w in seq.detection_windows
    }
    trace_times = [
        item.center if isinstance(item, DetectionWindow) else time
        for time, _, item in events
    ]
    trace = PopulationTrace(
        np.array(trace_times),
        tuple(label for _, label, _ in events),
        totals.populations / ens.n,
    )
    for label, record in records.items():
        logger.info(
            f"Window {label}: peak at {record.peak_time:.4g} s, "
            f"integrated intensity {record.integrated_intensity:.4g}"
        )
    return RunResult(records, trace)
