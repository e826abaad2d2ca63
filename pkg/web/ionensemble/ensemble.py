"""
Ion ensembles as structure-of-arrays.

Ion j is described by its optical detuning from f15, the detunings of its
ground and excited spin transitions, its position in the propagation plane
and its 4×4 density matrix over (g1, g3, e3, e5). Ensembles are immutable;
every operation returns a new one.
"""

from dataclasses import dataclass, replace

import numpy as np

from physmodel.geometry import Geometry
from physmodel.levels import LevelScheme


@dataclass(frozen=True, eq=False)
class Ion:
    delta_opt: float
    delta_g: float
    delta_e: float
    position: np.ndarray
    rho: np.ndarray


@dataclass(frozen=True, eq=False)
class Ensemble:
    delta_opt: np.ndarray
    delta_g: np.ndarray
    delta_e: np.ndarray
    positions: np.ndarray
    rho: np.ndarray
    seed: int
    geometry: Geometry
    scheme: LevelScheme
    time: float = 0.0
    # signal coherence with its spatial phase removed, set by the first signal pulse
    reference: np.ndarray | None = None
    reference_detunings: np.ndarray | None = None
    reference_span: float = 0.0

    def __post_init__(self):
        n = self.delta_opt.shape[0]
        if n < 1:
            raise ValueError("an ensemble needs at least one ion")
        if self.rho.shape != (n, 4, 4) or self.positions.shape != (n, 2):
            raise ValueError("ion arrays do not agree on the ion count")

    @property
    def n(self) -> int:
        return int(self.delta_opt.shape[0])

    def ion(self, index: int) -> Ion:
        return Ion(
            float(self.delta_opt[index]),
            float(self.delta_g[index]),
            float(self.delta_e[index]),
            self.positions[index].copy(),
            self.rho[index].copy(),
        )

    @property
    def ions(self) -> tuple[Ion, ...]:
        return tuple(self.ion(i) for i in range(self.n))

    def energies(self) -> np.ndarray:
        """Level energies (Hz) of every ion in the frame of the transition carriers."""
        zeros = np.zeros_like(self.delta_opt)
        return np.stack(
            [zeros, self.delta_g, self.delta_opt - self.delta_e, self.delta_opt], axis=1
        )

    def pair_detunings(self, lower: int, upper: int) -> np.ndarray:
        energies = self.energies()
        return energies[:, upper] - energies[:, lower]

    def evolve(self, **changes) -> "Ensemble":
        return replace(self, **changes)

    def slice(self, start: int, stop: int) -> "Ensemble":
        part = slice(start, stop)
        return replace(
            self,
            delta_opt=self.delta_opt[part],
            delta_g=self.delta_g[part],
            delta_e=self.delta_e[part],
            positions=self.positions[part],
            rho=self.rho[part],
            reference=None if self.reference is None else self.reference[part],
            reference_detunings=(
                None
                if self.reference_detunings is None
                else self.reference_detunings[part]
            ),
        )

    def populations(self) -> np.ndarray:
        """Ensemble-mean populations of (g1, g3, e3, e5)."""
        return np.real(np.einsum("nii->i", self.rho)) / self.n

    def population_sums(self) -> np.ndarray:
        return np.real(np.einsum("nii->i", self.rho))
