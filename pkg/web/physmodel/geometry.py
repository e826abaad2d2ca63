import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidGeometry
from .levels import DEFAULT_WAVELENGTH


@dataclass(frozen=True)
class Geometry:
    """
    Beam geometry in the propagation plane.

    The signal travels along +x, the axis of the crystal; all control pulses
    share one direction tilted by ``angle`` from it. Positions of ions are
    drawn over ``sample_length`` along x and ``beam_waist`` across it.
    """

    sample_length: float = 8e-3
    beam_waist: float = 100e-6
    angle: float = 30e-3
    wavelength: float = DEFAULT_WAVELENGTH
    refractive_index: float = 1.8
    silencing_threshold: float = 2 * math.pi

    def __post_init__(self):
        for name in ("sample_length", "beam_waist", "wavelength", "refractive_index"):
            value = getattr(self, name)
            if not value > 0:
                raise InvalidGeometry(f"{name} must be positive, got {value}")
        if self.silencing_threshold < 0:
            raise InvalidGeometry("silencing_threshold must be nonnegative")

    @property
    def wavenumber(self) -> float:
        """Wavenumber inside the crystal in rad/m."""
        return 2 * math.pi * self.refractive_index / self.wavelength

    @property
    def signal_direction(self) -> tuple[float, float]:
        return (1.0, 0.0)

    @property
    def control_direction(self) -> tuple[float, float]:
        return (math.cos(self.angle), math.sin(self.angle))

    def wavevector(self, direction: tuple[float, float]) -> np.ndarray:
        return self.wavenumber * np.asarray(direction, dtype=float)

    def is_silenced(self, mismatch: float) -> bool:
        return mismatch * self.sample_length > self.silencing_threshold
