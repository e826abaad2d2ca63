"""
Time-bin qubit storage fidelity.

Basis states are judged by counts in the correct and the wrong output bin,
F = C_correct / (C_correct + C_wrong), which is (S + N) / (S + 2N) when the
correct bin holds S signal plus N noise counts. Superposition states are
judged by the visibility V of the middle readout bin, F = (V + 1) / 2.
"""

import cmath
import json
import logging
import math
from collections.abc import Mapping
from dataclasses import asdict, dataclass

import numpy as np

from noisebudget.budget import safe_snr

from .exceptions import InvalidQubit, MissingBasis, NoCounts

logger = logging.getLogger(__name__)

EARLY = "e"
LATE = "l"
PLUS = "+"
PLUS_I = "+i"
INPUT_STATES = (EARLY, LATE, PLUS, PLUS_I)

EARLY_BIN = "ee"
MIDDLE_BIN = "el+le"
LATE_BIN = "ll"
READOUT_BINS = (EARLY_BIN, MIDDLE_BIN, LATE_BIN)

NORM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TimeBinQubit:
    """α|e⟩ + β·e^{iΔφ1}|l⟩ carried by ``mu`` photons on average."""

    delta_t: float
    phase1: float
    alpha: complex
    beta: complex
    mu: float

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise InvalidQubit(f"|α|² + |β|² = {norm!r}, expected 1")
        if self.mu < 0:
            raise InvalidQubit(f"mean photon number must be >= 0, got {self.mu}")

    @classmethod
    def for_input(cls, state: str, mu: float, delta_t: float) -> "TimeBinQubit":
        half = 1 / math.sqrt(2)
        if state == EARLY:
            return cls(delta_t, 0.0, 1.0, 0.0, mu)
        if state == LATE:
            return cls(delta_t, 0.0, 0.0, 1.0, mu)
        if state == PLUS:
            return cls(delta_t, 0.0, half, half, mu)
        if state == PLUS_I:
            return cls(delta_t, math.pi / 2, half, half, mu)
        raise InvalidQubit(f"unknown input state {state!r}")


def temporal_beamsplitter_readout(
    qubit: TimeBinQubit, phase2: float, eta: float, noise: float
) -> dict[str, float]:
    """
    Expected counts per trial in the three readout bins.

    Each (π/2)35 readout pulse retrieves half of the stored amplitude, so the
    early and late components each reach two bins. The middle bin holds both
    and interferes them with the phase difference Δφ1 − Δφ2.
    """
    retrieved = qubit.mu * eta / 4
    relative = cmath.exp(1j * (qubit.phase1 - phase2))
    return {
        EARLY_BIN: retrieved * abs(qubit.alpha) ** 2 + noise,
        MIDDLE_BIN: retrieved * abs(qubit.alpha + qubit.beta * relative) ** 2 + noise,
        LATE_BIN: retrieved * abs(qubit.beta) ** 2 + noise,
    }


def count_fidelity(correct: float, wrong: float) -> float:
    """
    C_correct / (C_correct + C_wrong).

    Raises:
        NoCounts: both bins are empty
    """
    if correct < 0 or wrong < 0:
        raise ValueError("counts must be nonnegative")
    if correct + wrong == 0:
        raise NoCounts("no counts in either bin")
    return correct / (correct + wrong)


def fidelity_basis(counts_early: float, counts_late: float, which: str) -> float:
    """Fidelity of a stored |e⟩ (``which="e"``) or |l⟩ (``which="l"``)."""
    if which == EARLY:
        return count_fidelity(counts_early, counts_late)
    if which == LATE:
        return count_fidelity(counts_late, counts_early)
    raise InvalidQubit(f"basis must be 'e' or 'l', got {which!r}")


def count_error(correct: float, wrong: float) -> float:
    """One-σ Poisson error of :func:`count_fidelity`."""
    total = correct + wrong
    if total == 0:
        raise NoCounts("no counts in either bin")
    return math.sqrt(correct * wrong / total**3)


def visibility(c_max: float, c_min: float) -> float:
    if c_max + c_min == 0:
        raise NoCounts("no counts in the middle bin")
    return (c_max - c_min) / (c_max + c_min)


def fidelity_from_visibility(v: float) -> float:
    return (v + 1) / 2


def fit_fringe(phases: np.ndarray, counts: np.ndarray) -> tuple[float, float]:
    """
    Least-squares fit of a + b·cos φ + c·sin φ to middle-bin counts.

    Returns the fringe maximum and minimum, a ± sqrt(b² + c²).
    """
    phases = np.asarray(phases, dtype=float)
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    (offset, cos_part, sin_part), *_ = np.linalg.lstsq(
        design, np.asarray(counts, dtype=float), rcond=None
    )
    amplitude = math.hypot(cos_part, sin_part)
    return float(offset + amplitude), float(max(offset - amplitude, 0.0))


@dataclass(frozen=True)
class FidelityReport:
    mu: float
    f_e: float
    f_l: float
    f_plus: float
    f_plus_i: float
    f_el: float
    f_pm: float
    f_avg: float
    visibilities: dict[str, float]
    snr: dict[str, float]
    errors: dict[str, float]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        # JSON has no infinity; a noiseless basis reports null
        data = self.to_dict()
        data["snr"] = {
            state: (value if math.isfinite(value) else None)
            for state, value in self.snr.items()
        }
        return json.dumps(data, indent=2, sort_keys=True)


def fidelity_report(
    counts: Mapping[str, tuple[float, float]], mu: float
) -> FidelityReport:
    """
    Average fidelity from (correct, wrong) counts of the four inputs.

    For |e⟩ and |l⟩ the pair is the counts of the correct and the wrong outer
    bin; for |+⟩ and |+i⟩ it is the fringe maximum and minimum of the middle
    bin, so that C_max / (C_max + C_min) equals (V + 1) / 2.

    Raises:
        MissingBasis: one of the four inputs has no counts entry
        NoCounts: an input recorded no counts at all
    """
    missing = [state for state in INPUT_STATES if state not in counts]
    if missing:
        raise MissingBasis(f"no counts for input states {missing}")

    fidelities = {state: count_fidelity(*counts[state]) for state in INPUT_STATES}
    errors = {state: count_error(*counts[state]) for state in INPUT_STATES}
    f_el = (fidelities[EARLY] + fidelities[LATE]) / 2
    f_pm = (fidelities[PLUS] + fidelities[PLUS_I]) / 2
    f_avg = f_el / 3 + 2 * f_pm / 3
    errors["avg"] = math.sqrt(
        (errors[EARLY] ** 2 + errors[LATE] ** 2) / 36
        + (errors[PLUS] ** 2 + errors[PLUS_I] ** 2) / 9
    )
    snr = {
        state: safe_snr(max(correct - wrong, 0.0), wrong)
        for state, (correct, wrong) in counts.items()
        if state in (EARLY, LATE)
    }
    visibilities = {state: visibility(*counts[state]) for state in (PLUS, PLUS_I)}
    logger.info(f"Average fidelity {f_avg:.4f} ± {errors['avg']:.4f} at μ = {mu}")
    return FidelityReport(
        mu,
        fidelities[EARLY],
        fidelities[LATE],
        fidelities[PLUS],
        fidelities[PLUS_I],
        f_el,
        f_pm,
        f_avg,
        visibilities,
        snr,
        errors,
    )
