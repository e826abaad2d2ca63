"""
Discrete spectral profiles over optical detuning.

A profile is a set of detunings (Hz) with nonnegative weights. Weights are
read as the probability mass of a cell centred on each detuning, so sampling
draws a continuous detuning from a piecewise-constant density.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import UnnormalizedProfile

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    detunings: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        detunings = np.atleast_1d(np.asarray(self.detunings, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if detunings.shape != weights.shape or detunings.ndim != 1:
            raise ValueError("detunings and weights must be 1-D arrays of equal size")
        if np.any(np.diff(detunings) <= 0):
            raise ValueError("detunings must be strictly increasing")
        if np.any(weights < 0):
            raise UnnormalizedProfile("profile weights must be nonnegative")
        object.__setattr__(self, "detunings", detunings)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def delta(cls, center: float = 0.0) -> "SpectralProfile":
        return cls(np.array([center]), np.array([1.0]))

    @classmethod
    def gaussian(
        cls, fwhm: float, points: int = 201, span: float = 3.0, center: float = 0.0
    ) -> "SpectralProfile":
        """Gaussian of the given FWHM sampled over ``center ± span·fwhm``."""
        grid = np.linspace(center - span * fwhm, center + span * fwhm, points)
        sigma = fwhm / (2 * math.sqrt(2 * math.log(2)))
        density = np.exp(-0.5 * ((grid - center) / sigma) ** 2)
        return cls(grid, density / density.sum())

    @classmethod
    def from_density(
        cls,
        grid: np.ndarray,
        density: np.ndarray,
        window: tuple[float, float] | None = None,
    ) -> "SpectralProfile":
        """
        Normalize a sampled density (e.g. an absorption spectrum) into a profile.

        Args:
            grid: Detunings in Hz, strictly increasing
            density: Nonnegative values on ``grid``
            window: Optional ``(low, high)`` range; points outside are dropped
        """
        grid = np.asarray(grid, dtype=float)
        density = np.clip(np.asarray(density, dtype=float), 0.0, None)
        if window is not None:
            keep = (grid >= window[0]) & (grid <= window[1])
            grid, density = grid[keep], density[keep]
        total = density.sum()
        if grid.size == 0 or total <= 0:
            raise UnnormalizedProfile("density has no weight inside the window")
        return cls(grid, density / total)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def is_normalized(self) -> bool:
        return abs(self.total_weight - 1.0) <= NORMALIZATION_TOLERANCE

    def require_normalized(self) -> None:
        if not self.is_normalized:
            raise UnnormalizedProfile(
                f"profile weights sum to {self.total_weight!r}, expected 1"
            )

    def cell_edges(self) -> np.ndarray:
        if self.detunings.size == 1:
            return np.array([self.detunings[0], self.detunings[0]])
        mids = 0.5 * (self.detunings[1:] + self.detunings[:-1])
        first = self.detunings[0] - (mids[0] - self.detunings[0])
        last = self.detunings[-1] + (self.detunings[-1] - mids[-1])
        return np.concatenate(([first], mids, [last]))

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        """Map uniforms in [0, 1) to detunings by inverting the cumulative weight."""
        self.require_normalized()
        if self.detunings.size == 1:
            return np.full(np.shape(uniforms), self.detunings[0])
        cumulative = np.concatenate(([0.0], np.cumsum(self.weights)))
        cumulative /= cumulative[-1]
        return np.interp(uniforms, cumulative, self.cell_edges())

    def average(self, values: np.ndarray) -> float:
        """Weighted mean of ``values`` given on the profile detunings."""
        self.require_normalized()
        return float(np.dot(self.weights, values))

    @property
    def span(self) -> tuple[float, float]:
        edges = self.cell_edges()
        return float(edges[0]), float(edges[-1])
