"""
Pulse sequences for the echo protocols.

A Sequence is an ordered list of pulses plus the detection windows in which
emission is recorded. Builders lay out the storage protocol (NLPE), the
comparison echoes (two-pulse echo, four-level echo, ROSE) and the time-bin
readout in which the last π₃₅ is split into two π/2 pulses.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any

from physmodel.config import geometry_from_dict
from physmodel.geometry import Geometry
from pulseshape.shapes import (
    CONTROL,
    SIGNAL,
    GaussianShape,
    IdealShape,
    PulseSpec,
    SechShape,
    pulse_from_dict,
    pulse_to_dict,
)

from .exceptions import (
    EchoOverlapsPulse,
    NonMonotoneTimings,
    OverlappingPulses,
    UnknownVariant,
)

logger = logging.getLogger(__name__)

NLPE = "NLPE"
ROSE = "ROSE"
FLE4 = "FLE4"
PE2 = "PE2"
QUBIT = "QUBIT"
CUSTOM = "custom"
PROTOCOL_TAGS = (NLPE, ROSE, FLE4, PE2, QUBIT, CUSTOM)
VARIANTS = (PE2, FLE4, ROSE)

ECHO_WINDOW = "echo"
MONITOR_WINDOW = "monitor"
FIRST_ECHO_WINDOW = "first_echo"

DEFAULT_WINDOW_WIDTH = 1.57e-6
DEFAULT_SIGNAL_AREA = 0.1 * math.pi
DEFAULT_QUBIT_DELAY = 1.6e-6


@dataclass(frozen=True)
class DetectionWindow:
    label: str
    start: float
    stop: float
    transition: str = "f15"
    direction: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if not self.stop > self.start:
            raise NonMonotoneTimings(
                f"window {self.label!r} ends at {self.stop} "
                f"before it starts at {self.start}"
            )

    @property
    def center(self) -> float:
        return 0.5 * (self.start + self.stop)

    @property
    def width(self) -> float:
        return self.stop - self.start

    @classmethod
    def centered(
        cls,
        label: str,
        center: float,
        width: float,
        transition: str = "f15",
        direction: tuple[float, float] = (1.0, 0.0),
    ) -> "DetectionWindow":
        return cls(label, center - width / 2, center + width / 2, transition, direction)


@dataclass(frozen=True)
class Sequence:
    pulses: tuple[PulseSpec, ...]
    detection_windows: tuple[DetectionWindow, ...] = ()
    geometry: Geometry = field(default_factory=Geometry)
    protocol_tag: str = CUSTOM

    def __post_init__(self):
        centers = [pulse.center_time for pulse in self.pulses]
        for earlier, later in zip(centers, centers[1:]):
            if not later > earlier:
                raise NonMonotoneTimings(
                    f"pulse centers must increase strictly, got {earlier} then {later}"
                )
        if self.protocol_tag not in PROTOCOL_TAGS:
            raise UnknownVariant(f"unknown protocol tag {self.protocol_tag!r}")

    def check_windows(self) -> None:
        """Raise OverlappingPulses if any window intersects a pulse support."""
        for window in self.detection_windows:
            for pulse in self.pulses:
                start, stop = pulse.support
                if start < window.stop and window.start < stop:
                    raise OverlappingPulses(
                        f"window {window.label!r} [{window.start}, {window.stop}] "
                        f"intersects the {pulse.transition} pulse "
                        f"at {pulse.center_time}"
                    )

    def window(self, label: str) -> DetectionWindow:
        for window in self.detection_windows:
            if window.label == label:
                return window
        raise KeyError(label)

    @property
    def signal_pulses(self) -> tuple[PulseSpec, ...]:
        return tuple(p for p in self.pulses if p.role == SIGNAL)

    @property
    def control_pulses(self) -> tuple[PulseSpec, ...]:
        return tuple(p for p in self.pulses if p.role != SIGNAL)

    @property
    def timings(self) -> tuple[float, ...]:
        return tuple(p.center_time for p in self.pulses)


@dataclass(frozen=True)
class NlpeTimings:
    """Centers t0 < t1 < t2 < t3 < t4 of the five NLPE pulses (s)."""

    t0: float
    t1: float
    t2: float
    t3: float
    t4: float

    def __post_init__(self):
        values = self.as_tuple()
        if any(b <= a for a, b in zip(values, values[1:])):
            raise NonMonotoneTimings(f"timings must increase strictly, got {values}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.t0, self.t1, self.t2, self.t3, self.t4)

    @property
    def t5(self) -> float:
        return self.t4 + self.t3 - self.t2 - self.t1 + self.t0

    @property
    def spin_storage(self) -> float:
        """t4 - t1: spin coherence time plus the optical storage."""
        return self.t4 - self.t1

    @property
    def optical_storage(self) -> float:
        return self.t3 - self.t2

    @classmethod
    def from_sequence(cls, values) -> "NlpeTimings":
        return cls(*(float(v) for v in values))


REFERENCE_TIMINGS = NlpeTimings(0.0, 4.1e-6, 6.6e-6, 15.0e-6, 17.4e-6)
QUBIT_TIMINGS = NlpeTimings(0.0, 4.1e-6, 6.6e-6, 19.6e-6, 22.0e-6)


@dataclass(frozen=True)
class PulseDurations:
    signal_fwhm: float = 2.62e-6
    pi35: float = 3.75e-6
    pi13: float = 1.5e-6
    pi15: float = 1.5e-6
    signal_area: float = DEFAULT_SIGNAL_AREA


@dataclass(frozen=True)
class ControlDesign:
    """
    How control pulses are realised.

    ``ideal`` gives exact rotations; ``sech`` uses complex hyperbolic secants
    whose peak Rabi frequencies come from calibrate_sech, keyed by transition.
    """

    kind: str = "ideal"
    chirp_mu: float = 2.0
    peak_rabi: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("ideal", "sech"):
            raise UnknownVariant(
                f"control design must be 'ideal' or 'sech', got {self.kind!r}"
            )

    def rabi_for(self, transition: str) -> float:
        table = dict(self.peak_rabi)
        if transition not in table:
            raise UnknownVariant(f"no calibrated sech amplitude for {transition}")
        return table[transition]


def signal_pulse(
    center: float,
    durations: PulseDurations,
    transition: str = "f15",
    phase: float = 0.0,
    direction: tuple[float, float] = (1.0, 0.0),
) -> PulseSpec:
    return PulseSpec(
        transition=transition,
        center_time=center,
        shape=GaussianShape(durations.signal_fwhm),
        nominal_area=durations.signal_area,
        phase=phase,
        direction=direction,
        role=SIGNAL,
    )


def control_pulse(
    transition: str,
    center: float,
    duration: float,
    geometry: Geometry,
    design: ControlDesign,
    area: float = math.pi,
    phase: float = 0.0,
) -> PulseSpec:
    if design.kind == "sech" and area == math.pi:
        shape = SechShape(design.rabi_for(transition), 10.0 / duration, design.chirp_mu)
    else:
        shape = IdealShape(duration)
    return PulseSpec(
        transition=transition,
        center_time=center,
        shape=shape,
        nominal_area=area,
        phase=phase,
        direction=geometry.control_direction,
        role=CONTROL,
    )


def _require_clear(window: DetectionWindow, pulses: list[PulseSpec]) -> None:
    for pulse in pulses:
        start, stop = pulse.support
        if start < window.stop and window.start < stop:
            raise EchoOverlapsPulse(
                f"{window.label} window [{window.start:.4g}, {window.stop:.4g}] s "
                f"overlaps the {pulse.transition} pulse "
                f"centered at {pulse.center_time:.4g} s"
            )


def _nlpe_controls(
    timings: NlpeTimings,
    durations: PulseDurations,
    geometry: Geometry,
    design: ControlDesign,
) -> list[PulseSpec]:
    return [
        control_pulse("f35", timings.t1, durations.pi35, geometry, design),
        control_pulse("f13", timings.t2, durations.pi13, geometry, design),
        control_pulse("f13", timings.t3, durations.pi13, geometry, design),
        control_pulse("f35", timings.t4, durations.pi35, geometry, design),
    ]


def build_nlpe(
    timings: NlpeTimings,
    durations: PulseDurations | None = None,
    geometry: Geometry | None = None,
    window_width: float = DEFAULT_WINDOW_WIDTH,
    design: ControlDesign | None = None,
    monitor_window: bool = False,
) -> Sequence:
    """
    Build the noiseless photon echo sequence.

    The detection window is centered on t5 = t4 + t3 - t2 - t1 + t0 in the
    signal direction. With ``monitor_window`` a second window is centered
    between the two π13 pulses, where the four-level echo would appear.

    Raises:
        NonMonotoneTimings: timings are not strictly increasing
        EchoOverlapsPulse: a window intersects a pulse support
    """
    durations = durations or PulseDurations()
    geometry = geometry or Geometry()
    design = design or ControlDesign()

    pulses = [signal_pulse(timings.t0, durations, direction=geometry.signal_direction)]
    pulses += _nlpe_controls(timings, durations, geometry, design)

    echo = DetectionWindow.centered(
        ECHO_WINDOW, timings.t5, window_width, "f15", geometry.signal_direction
    )
    if echo.start < timings.t4 + durations.pi35 / 2:
        raise EchoOverlapsPulse(
            f"echo at t5 = {timings.t5:.4g} s leaves no room "
            f"for a {window_width:.4g} s "
            f"window after the last pulse at {timings.t4:.4g} s"
        )
    windows = [echo]
    if monitor_window:
        monitor = DetectionWindow.centered(
            MONITOR_WINDOW,
            0.5 * (timings.t2 + timings.t3),
            window_width,
            "f15",
            geometry.signal_direction,
        )
        _require_clear(monitor, pulses)
        windows.insert(0, monitor)
    _require_clear(echo, pulses)
    logger.debug(f"Built NLPE sequence with echo window centered at {timings.t5:.4g} s")
    return Sequence(tuple(pulses), tuple(windows), geometry, NLPE)


def _predicted_window(
    label: str,
    pulses: list[PulseSpec],
    geometry: Geometry,
    time: float,
    width: float,
) -> DetectionWindow:
    """Window around the predicted echo at ``time``, pointing along its wavevector."""
    from .echoes import predict_echoes

    probe = Sequence(tuple(pulses), (), geometry, CUSTOM)
    for echo in predict_echoes(probe):
        if math.isclose(echo.time, time, rel_tol=1e-12, abs_tol=1e-15):
            return DetectionWindow.centered(
                label, time, width, echo.transition, echo.direction
            )
    raise UnknownVariant(f"no echo is predicted at {time:.4g} s")


def build_variant(
    kind: str,
    timings: tuple[float, ...],
    geometry: Geometry | None = None,
    durations: PulseDurations | None = None,
    window_width: float = DEFAULT_WINDOW_WIDTH,
    design: ControlDesign | None = None,
) -> Sequence:
    """
    Build one of the comparison echoes.

    PE2 takes (t0, t1); FLE4 and ROSE take (t0, t1, t2). FLE4 controls are π35
    then π13, ROSE uses two π pulses on the signal transition.
    """
    geometry = geometry or Geometry()
    durations = durations or PulseDurations()
    design = design or ControlDesign(kind="ideal")
    expected = {PE2: 2, FLE4: 3, ROSE: 3}
    if kind not in expected:
        raise UnknownVariant(f"unknown variant {kind!r}; expected one of {VARIANTS}")
    if len(timings) != expected[kind]:
        raise NonMonotoneTimings(
            f"{kind} needs {expected[kind]} timings, got {len(timings)}"
        )
    if any(b <= a for a, b in zip(timings, timings[1:])):
        raise NonMonotoneTimings(
            f"timings must increase strictly, got {tuple(timings)}"
        )

    t = [float(v) for v in timings]
    pulses = [signal_pulse(t[0], durations, direction=geometry.signal_direction)]
    windows: list[DetectionWindow] = []
    if kind == PE2:
        pulses.append(control_pulse("f15", t[1], durations.pi15, geometry, design))
        windows.append(
            _predicted_window(
                ECHO_WINDOW, pulses, geometry, 2 * t[1] - t[0], window_width
            )
        )
    elif kind == FLE4:
        pulses.append(control_pulse("f35", t[1], durations.pi35, geometry, design))
        pulses.append(control_pulse("f13", t[2], durations.pi13, geometry, design))
        windows.append(
            _predicted_window(
                ECHO_WINDOW, pulses, geometry, t[2] + t[1] - t[0], window_width
            )
        )
    else:
        pulses.append(control_pulse("f15", t[1], durations.pi15, geometry, design))
        pulses.append(control_pulse("f15", t[2], durations.pi15, geometry, design))
        first = 2 * t[1] - t[0]
        if first + window_width / 2 < t[2] - durations.pi15 / 2:
            windows.append(
                _predicted_window(
                    FIRST_ECHO_WINDOW, pulses, geometry, first, window_width
                )
            )
        windows.append(
            _predicted_window(
                ECHO_WINDOW, pulses, geometry, 2 * t[2] - 2 * t[1] + t[0], window_width
            )
        )
    for window in windows:
        _require_clear(window, pulses)
    return Sequence(tuple(pulses), tuple(windows), geometry, kind)


def build_qubit_readout(
    timings: NlpeTimings,
    delta_t: float = DEFAULT_QUBIT_DELAY,
    input_phase: float = 0.0,
    readout_phase: float = 0.0,
    durations: PulseDurations | None = None,
    geometry: Geometry | None = None,
    bin_width: float | None = None,
    design: ControlDesign | None = None,
) -> Sequence:
    """
    Time-bin storage with the temporal beam splitter.

    The early and late inputs sit at t0 and t0 + delta_t with relative phase
    ``input_phase``. The last π35 is replaced by two (π/2)35 pulses at t4 and
    t4 + delta_t, the second carrying ``readout_phase``. The three output bins
    are centered at t5, t5 + delta_t and t5 + 2 delta_t.
    """
    durations = durations or PulseDurations()
    geometry = geometry or Geometry()
    design = design or ControlDesign()
    bin_width = bin_width or delta_t
    if not delta_t > 0:
        raise NonMonotoneTimings("delta_t must be positive")
    if not timings.t0 + delta_t < timings.t1:
        raise NonMonotoneTimings("the late input must precede the first control pulse")

    half_area = math.pi / 2
    pulses = [
        signal_pulse(timings.t0, durations, direction=geometry.signal_direction),
        signal_pulse(
            timings.t0 + delta_t,
            durations,
            phase=input_phase,
            direction=geometry.signal_direction,
        ),
        *_nlpe_controls(timings, durations, geometry, design)[:3],
        control_pulse(
            "f35", timings.t4, durations.pi35, geometry, design, area=half_area
        ),
        control_pulse(
            "f35",
            timings.t4 + delta_t,
            durations.pi35,
            geometry,
            design,
            area=half_area,
            phase=readout_phase,
        ),
    ]
    labels = ("ee", "el+le", "ll")
    windows = tuple(
        DetectionWindow.centered(
            label, timings.t5 + i * delta_t, bin_width, "f15", geometry.signal_direction
        )
        for i, label in enumerate(labels)
    )
    for window in windows:
        _require_clear(window, pulses)
    return Sequence(tuple(pulses), windows, geometry, QUBIT)


def window_to_dict(window: DetectionWindow) -> dict[str, Any]:
    return {
        "label": window.label,
        "start": window.start,
        "stop": window.stop,
        "transition": window.transition,
        "direction": list(window.direction),
    }


def window_from_dict(data: dict[str, Any]) -> DetectionWindow:
    direction = data.get("direction", (1.0, 0.0))
    return DetectionWindow(
        label=data["label"],
        start=float(data["start"]),
        stop=float(data["stop"]),
        transition=data.get("transition", "f15"),
        direction=(float(direction[0]), float(direction[1])),
    )


def sequence_to_dict(sequence: Sequence) -> dict[str, Any]:
    return {
        "protocol_tag": sequence.protocol_tag,
        "geometry": vars(sequence.geometry).copy(),
        "pulses": [pulse_to_dict(p) for p in sequence.pulses],
        "detection_windows": [window_to_dict(w) for w in sequence.detection_windows],
    }


def sequence_from_dict(data: dict[str, Any]) -> Sequence:
    return Sequence(
        pulses=tuple(pulse_from_dict(p) for p in data.get("pulses", [])),
        detection_windows=tuple(
            window_from_dict(w) for w in data.get("detection_windows", [])
        ),
        geometry=geometry_from_dict(data.get("geometry", {})),
        protocol_tag=data.get("protocol_tag", CUSTOM),
    )
