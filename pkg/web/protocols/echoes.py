"""
Echo timing and phase matching.

Each signal pulse opens a coherence pathway. Every control pulse acting on a
level of the ket or the bra either moves it across the addressed transition
(adding ±k of the pulse to the pathway wavevector) or, for areas other than π,
also leaves it in place. An echo is emitted where the accumulated optical
phase of an optical coherence returns to zero between two pulses, or after the
last one. Only the coefficient of the optical detuning decides the echo time;
spin detunings merely reduce its amplitude.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from physmodel.levels import BASIS, EXCITED, LevelScheme
from pulseshape.shapes import SIGNAL

from .sequences import Sequence

logger = logging.getLogger(__name__)

AREA_TOLERANCE = 1e-9
TIME_TOLERANCE = 1e-15


@dataclass(frozen=True, eq=False)
class EchoPrediction:
    time: float
    wavevector: np.ndarray
    transition: str
    silenced: bool
    mismatch_norm: float
    inverted: bool = False
    pathways: int = 1

    @property
    def direction(self) -> tuple[float, float]:
        norm = float(np.hypot(*self.wavevector))
        if norm == 0.0:
            return (1.0, 0.0)
        return (float(self.wavevector[0] / norm), float(self.wavevector[1] / norm))


@dataclass(frozen=True, eq=False)
class _Pathway:
    ket: str
    bra: str
    wavevector: np.ndarray
    # accumulated coefficient of delta_opt in the coherence phase, in seconds
    phase_time: float
    background: str

    @property
    def rate(self) -> int:
        return _optical_weight(self.ket) - _optical_weight(self.bra)


_KIND = dict(zip(BASIS, ("ground", "ground", EXCITED, EXCITED)))


def _optical_weight(level: str) -> int:
    return 1 if _KIND[level] == EXCITED else 0


def _moves(level: str, lower: str, upper: str, area: float) -> list[tuple[str, int]]:
    """Possible (new level, sign of k) for one side of the coherence under a pulse."""
    if level not in (lower, upper) or area < AREA_TOLERANCE:
        return [(level, 0)]
    flipped = (upper, +1) if level == lower else (lower, -1)
    if abs(area - math.pi) < AREA_TOLERANCE:
        return [flipped]
    return [(level, 0), flipped]


def _flip_background(level: str, lower: str, upper: str, area: float) -> str:
    if abs(area - math.pi) >= AREA_TOLERANCE:
        return level
    if level == lower:
        return upper
    if level == upper:
        return lower
    return level


def _emitting_transition(scheme: LevelScheme, ground: str, excited: str) -> str:
    for transition in scheme.transitions:
        if transition.lower == ground and transition.upper == excited:
            return transition.name
    return f"{ground}-{excited}"


def predict_echoes(
    seq: Sequence, scheme: LevelScheme | None = None
) -> list[EchoPrediction]:
    """
    Enumerate rephasing pathways of ``seq`` and return the echoes they emit.

    The returned wavevector is that of the emitting coherence ρ(excited,
    ground). Free-induction decay right after a pulse is not an echo and is
    skipped. Echoes arriving at the same time on the same transition with the
    same wavevector are merged and counted in ``pathways``.
    """
    scheme = scheme or LevelScheme.default()
    geometry = seq.geometry
    found: list[EchoPrediction] = []

    for signal_index, signal in enumerate(seq.pulses):
        if signal.role != SIGNAL:
            continue
        addressed = scheme.transition(signal.transition)
        lower, upper = addressed.lower, addressed.upper
        paths = [
            _Pathway(upper, lower, geometry.wavevector(signal.direction), 0.0, lower)
        ]
        last = signal.center_time
        for pulse in seq.pulses[signal_index + 1:]:
            if pulse.role == SIGNAL:
                continue
            found += _echoes_in(paths, last, pulse.center_time, scheme, geometry)
            paths = _apply(paths, pulse, pulse.center_time - last, scheme, geometry)
            last = pulse.center_time
        found += _echoes_in(paths, last, math.inf, scheme, geometry)

    merged = _merge(found)
    logger.debug(f"Predicted {len(merged)} echoes for a {seq.protocol_tag} sequence")
    return merged


def _apply(paths, pulse, elapsed, scheme, geometry) -> list[_Pathway]:
    transition = scheme.transition(pulse.transition)
    lower, upper = transition.lower, transition.upper
    kp = geometry.wavevector(pulse.direction)
    area = pulse.nominal_area
    result = []
    for path in paths:
        phase_time = path.phase_time + path.rate * elapsed
        background = _flip_background(path.background, lower, upper, area)
        for ket, ket_sign in _moves(path.ket, lower, upper, area):
            for bra, bra_sign in _moves(path.bra, lower, upper, area):
                wavevector = path.wavevector + (ket_sign - bra_sign) * kp
                result.append(_Pathway(ket, bra, wavevector, phase_time, background))
    return result


def _echoes_in(paths, start, stop, scheme, geometry) -> list[EchoPrediction]:
    echoes = []
    k = geometry.wavenumber
    for path in paths:
        if path.rate == 0 or path.phase_time == 0.0:
            continue
        time = start - path.phase_time / path.rate
        if not start < time < stop:
            continue
        if path.rate > 0:
            excited, ground, wavevector = path.ket, path.bra, path.wavevector
        else:
            excited, ground, wavevector = path.bra, path.ket, -path.wavevector
        mismatch = abs(float(np.hypot(*wavevector)) - k)
        echoes.append(
            EchoPrediction(
                time=time,
                wavevector=wavevector,
                transition=_emitting_transition(scheme, ground, excited),
                silenced=geometry.is_silenced(mismatch),
                mismatch_norm=mismatch,
                inverted=_KIND[path.background] == EXCITED,
            )
        )
    return echoes


def _merge(echoes: list[EchoPrediction]) -> list[EchoPrediction]:
    merged: list[EchoPrediction] = []
    for echo in sorted(echoes, key=lambda e: e.time):
        for i, other in enumerate(merged):
            if (
                abs(other.time - echo.time) <= TIME_TOLERANCE + 1e-12 * abs(echo.time)
                and other.transition == echo.transition
                and np.allclose(
                    other.wavevector, echo.wavevector, rtol=1e-12, atol=1e-9
                )
            ):
                merged[i] = EchoPrediction(
                    other.time,
                    other.wavevector,
                    other.transition,
                    other.silenced,
                    other.mismatch_norm,
                    other.inverted,
                    other.pathways + 1,
                )
                break
        else:
            merged.append(echo)
    return merged


def echo_at(
    predictions: list[EchoPrediction], time: float, transition: str | None = None
) -> EchoPrediction:
    """The prediction emitted at ``time`` (and on ``transition`` if given)."""
    for echo in predictions:
        if math.isclose(echo.time, time, rel_tol=1e-12, abs_tol=TIME_TOLERANCE):
            if transition is None or echo.transition == transition:
                return echo
    raise KeyError(f"no echo predicted at {time}")
