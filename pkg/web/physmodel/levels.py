"""
Four-level scheme of the memory ions.

The basis order {g1, g3, e3, e5} is fixed; every density matrix in the
project is written in it. Energies and carriers are absolute frequencies in Hz.
"""

from dataclasses import dataclass

from .exceptions import UnknownTransition

GROUND = "ground"
EXCITED = "excited"

BASIS = ("g1", "g3", "e3", "e5")

SPEED_OF_LIGHT = 299_792_458.0

# Placeholder hyperfine splittings; configs may override them.
DEFAULT_WAVELENGTH = 580.04e-9
DEFAULT_GROUND_SPLITTING = 34.5e6
DEFAULT_EXCITED_SPLITTING = 102.0e6


@dataclass(frozen=True)
class Level:
    label: str
    kind: str
    energy: float


@dataclass(frozen=True)
class Transition:
    name: str
    lower: str
    upper: str
    carrier: float
    dipole_strength: float = 1.0


@dataclass(frozen=True)
class LevelScheme:
    levels: tuple[Level, ...]
    transitions: tuple[Transition, ...]

    @classmethod
    def default(
        cls,
        optical_carrier: float = SPEED_OF_LIGHT / DEFAULT_WAVELENGTH,
        ground_splitting: float = DEFAULT_GROUND_SPLITTING,
        excited_splitting: float = DEFAULT_EXCITED_SPLITTING,
    ) -> "LevelScheme":
        """Build the g1/g3/e3/e5 scheme from the f15 carrier and two splittings."""
        e5 = optical_carrier
        e3 = optical_carrier - excited_splitting
        levels = (
            Level("g1", GROUND, 0.0),
            Level("g3", GROUND, ground_splitting),
            Level("e3", EXCITED, e3),
            Level("e5", EXCITED, e5),
        )
        transitions = (
            Transition("f15", "g1", "e5", e5),
            Transition("f35", "g3", "e5", e5 - ground_splitting),
            Transition("f13", "g1", "e3", e3),
            Transition("f33", "g3", "e3", e3 - ground_splitting),
        )
        return cls(levels=levels, transitions=transitions)

    def level(self, label: str) -> Level:
        for level in self.levels:
            if level.label == label:
                return level
        raise KeyError(label)

    def transition(self, name: str) -> Transition:
        for transition in self.transitions:
            if transition.name == name:
                return transition
        raise UnknownTransition(f"{name!r} is not a transition of this scheme")

    def pair(self, name: str) -> tuple[int, int]:
        """Basis indices (lower, upper) addressed by transition ``name``."""
        transition = self.transition(name)
        return BASIS.index(transition.lower), BASIS.index(transition.upper)

    def closure_error(self) -> float:
        """f15 + f33 - f13 - f35 in Hz; zero for a consistent scheme."""
        carrier = {t.name: t.carrier for t in self.transitions}
        return (carrier["f15"] + carrier["f33"]) - (carrier["f13"] + carrier["f35"])

    @property
    def ground_splitting(self) -> float:
        return self.level("g3").energy - self.level("g1").energy

    @property
    def excited_splitting(self) -> float:
        return self.level("e5").energy - self.level("e3").energy
