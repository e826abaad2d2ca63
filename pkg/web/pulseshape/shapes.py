"""
Pulse waveforms.

Every shape has a characteristic width; the envelope is exactly zero beyond
TRUNCATION_WIDTHS of it on either side of the pulse center. Rabi amplitudes are
in Hz (cycles), so a pulse of constant amplitude Ω held for T has area 2πΩT.
"""

import math
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .exceptions import InvalidPulse

TRUNCATION_WIDTHS = 5.0

SIGNAL = "signal"
CONTROL = "control"
PUMP = "pump"
ROLES = (SIGNAL, CONTROL, PUMP)

_GAUSSIAN_AREA_FACTOR = math.sqrt(math.pi / (4 * math.log(2)))


@dataclass(frozen=True)
class GaussianShape:
    """Gaussian amplitude envelope; ``fwhm`` is the amplitude full width."""

    fwhm: float
    kind = "gaussian"

    @property
    def width(self) -> float:
        return self.fwhm / (2 * math.sqrt(2 * math.log(2)))


@dataclass(frozen=True)
class SechShape:
    """
    Complex hyperbolic secant.

    ``peak_rabi`` in Hz, ``beta`` in 1/s, ``chirp_mu`` dimensionless; the
    instantaneous detuning sweeps ±μβ (rad/s).
    """

    peak_rabi: float
    beta: float
    chirp_mu: float
    kind = "sech"

    @property
    def width(self) -> float:
        return 1.0 / self.beta


@dataclass(frozen=True)
class ChirpShape:
    """Flat-top pulse whose frequency sweeps linearly over ``sweep_width``."""

    sweep_width: float
    duration: float
    kind = "chirp"

    @property
    def width(self) -> float:
        return self.duration / (2 * TRUNCATION_WIDTHS)


@dataclass(frozen=True)
class IdealShape:
    """Hard-pulse limit: an exact rotation by the nominal area at any detuning."""

    duration: float
    kind = "ideal"

    @property
    def width(self) -> float:
        return self.duration / (2 * TRUNCATION_WIDTHS)


Shape = GaussianShape | SechShape | ChirpShape | IdealShape
SHAPES = {cls.kind: cls for cls in (GaussianShape, SechShape, ChirpShape, IdealShape)}


@dataclass(frozen=True)
class PulseSpec:
    transition: str
    center_time: float
    shape: Shape
    nominal_area: float = math.pi
    phase: float = 0.0
    direction: tuple[float, float] = (1.0, 0.0)
    role: str = CONTROL

    def __post_init__(self):
        if not self.shape.width > 0 or not math.isfinite(self.shape.width):
            raise InvalidPulse(f"{self.shape.kind} width must be positive")
        if isinstance(self.shape, SechShape) and self.shape.peak_rabi < 0:
            raise InvalidPulse("sech peak_rabi must be nonnegative")
        if self.role not in ROLES:
            raise InvalidPulse(f"role must be one of {ROLES}, got {self.role!r}")
        if self.nominal_area < 0:
            raise InvalidPulse("nominal_area must be nonnegative")
        norm = math.hypot(*self.direction)
        if abs(norm - 1.0) > 1e-12:
            raise InvalidPulse(f"direction {self.direction} is not a unit vector")

    @property
    def half_support(self) -> float:
        return TRUNCATION_WIDTHS * self.shape.width

    @property
    def support(self) -> tuple[float, float]:
        return (
            self.center_time - self.half_support,
            self.center_time + self.half_support,
        )

    @property
    def peak_amplitude(self) -> float:
        """Peak Rabi amplitude in Hz."""
        shape = self.shape
        if isinstance(shape, SechShape):
            return shape.peak_rabi
        if isinstance(shape, GaussianShape):
            width = shape.fwhm * _GAUSSIAN_AREA_FACTOR
            return self.nominal_area / (2 * math.pi * width)
        return self.nominal_area / (2 * math.pi * shape.duration)

    @property
    def is_null(self) -> bool:
        return self.peak_amplitude == 0.0

    def with_rabi_scale(self, factor: float) -> "PulseSpec":
        """The same pulse driven with ``factor`` times the Rabi frequency."""
        if factor == 1.0:
            return self
        if isinstance(self.shape, SechShape):
            shape = replace(self.shape, peak_rabi=self.shape.peak_rabi * factor)
            return replace(self, shape=shape)
        return replace(self, nominal_area=self.nominal_area * factor)


def envelope_array(spec: PulseSpec, t: np.ndarray) -> np.ndarray:
    """Complex Rabi amplitude (Hz) of ``spec`` at the times ``t``."""
    tau = np.asarray(t, dtype=float) - spec.center_time
    inside = np.abs(tau) <= spec.half_support
    shape = spec.shape
    peak = spec.peak_amplitude
    if isinstance(shape, GaussianShape):
        value = peak * np.exp(-4 * math.log(2) * tau**2 / shape.fwhm**2) + 0j
        value = value * np.exp(1j * spec.phase)
    elif isinstance(shape, SechShape):
        x = shape.beta * tau
        # log(cosh x) written to stay finite for large |x|
        log_cosh = np.logaddexp(x, -x) - math.log(2)
        phase = shape.chirp_mu * log_cosh + spec.phase
        value = peak / np.cosh(x) * np.exp(1j * phase)
    elif isinstance(shape, ChirpShape):
        rate = shape.sweep_width / shape.duration
        value = peak * np.exp(1j * (math.pi * rate * tau**2 + spec.phase))
    else:
        value = np.full(tau.shape, peak * np.exp(1j * spec.phase))
    return np.where(inside, value, 0j)


def envelope(spec: PulseSpec, t: float) -> complex:
    """Complex Rabi amplitude (Hz) of ``spec`` at time ``t``; zero off support."""
    return complex(envelope_array(spec, np.array([t]))[0])


def pulse_to_dict(spec: PulseSpec) -> dict[str, Any]:
    shape = {"kind": spec.shape.kind, **vars(spec.shape)}
    return {
        "transition": spec.transition,
        "center_time": spec.center_time,
        "shape": shape,
        "nominal_area": spec.nominal_area,
        "phase": spec.phase,
        "direction": list(spec.direction),
        "role": spec.role,
    }


def pulse_from_dict(data: dict[str, Any]) -> PulseSpec:
    shape_data = dict(data["shape"])
    kind = shape_data.pop("kind")
    if kind not in SHAPES:
        raise InvalidPulse(f"unknown pulse shape {kind!r}")
    shape = SHAPES[kind](**{k: float(v) for k, v in shape_data.items()})
    direction = data.get("direction", (1.0, 0.0))
    return PulseSpec(
        transition=data["transition"],
        center_time=float(data["center_time"]),
        shape=shape,
        nominal_area=float(data.get("nominal_area", math.pi)),
        phase=float(data.get("phase", 0.0)),
        direction=(float(direction[0]), float(direction[1])),
        role=data.get("role", CONTROL),
    )
