"""
Per-ion pulse maps and free evolution of the density matrices.

Pulses act instantaneously at their center time with the center-referenced
two-level map of the addressed pair, conjugated by the spatial phase k·r of
the ion. Between pulses every coherence precesses at the energy difference of
its levels and decays; excited populations relax with T1.

The optical decoherence rate γ acts on coherences involving e3, the level the
π13 pulses fill during the optical storage. Coherences on f15 and f35 only
lose the half-T1 rate. Pulse Rabi frequencies scale with the dipole
strength of the addressed transition.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from physmodel.material import MaterialParams
from pulseshape.propagation import nearest_unitary, propagate_many, unitarity_drift
from pulseshape.shapes import SIGNAL, IdealShape, PulseSpec

from .ensemble import Ensemble

logger = logging.getLogger(__name__)

TABLE_POINTS = 257

G1, G3, E3, E5 = range(4)
_EXCITED = (E3, E5)


@dataclass(frozen=True, eq=False)
class TransferTable:
    """Transfer maps of one shaped pulse on a detuning grid, spline-interpolated."""

    detunings: np.ndarray
    maps: np.ndarray
    _spline: CubicSpline | None = field(default=None, repr=False)

    @classmethod
    def build(
        cls, pulse: PulseSpec, low: float, high: float, points: int = TABLE_POINTS
    ) -> "TransferTable":
        if high <= low:
            grid = np.array([low])
        else:
            pad = 1e-6 * (high - low)
            grid = np.linspace(low - pad, high + pad, points)
        maps = propagate_many(pulse, grid)
        spline = None
        if grid.size > 1:
            flat = maps.reshape(grid.size, 4)
            values = np.concatenate([flat.real, flat.imag], axis=1)
            spline = CubicSpline(grid, values, axis=0)
        logger.debug(
            f"Tabulated {pulse.transition} pulse at {pulse.center_time:.4g} s "
            f"over {grid.size} detunings"
        )
        return cls(grid, maps, spline)

    @classmethod
    def for_ensemble(cls, pulse: PulseSpec, ens: Ensemble) -> "TransferTable":
        lower, upper = ens.scheme.pair(pulse.transition)
        pulse = driven_pulse(ens, pulse)
        detunings = ens.pair_detunings(lower, upper)
        return cls.build(pulse, float(detunings.min()), float(detunings.max()))

    def lookup(self, detunings: np.ndarray) -> np.ndarray:
        detunings = np.asarray(detunings, dtype=float)
        if self._spline is None:
            return np.broadcast_to(self.maps[0], (detunings.size, 2, 2)).copy()
        clipped = np.clip(detunings, self.detunings[0], self.detunings[-1])
        values = self._spline(clipped)
        maps = (values[:, :4] + 1j * values[:, 4:]).reshape(-1, 2, 2)
        drift = unitarity_drift(maps)
        logger.debug(f"Interpolated maps drift {drift:.2e} from unitary")
        return nearest_unitary(maps)


def driven_pulse(ens: Ensemble, pulse: PulseSpec) -> PulseSpec:
    """``pulse`` with its Rabi frequency scaled by the transition dipole strength."""
    strength = ens.scheme.transition(pulse.transition).dipole_strength
    return pulse.with_rabi_scale(strength)


def is_exact(pulse: PulseSpec) -> bool:
    return pulse.is_null or isinstance(pulse.shape, IdealShape)


def transfer_maps(
    ens: Ensemble, pulse: PulseSpec, table: TransferTable | None = None
) -> np.ndarray:
    """Two-level maps of ``pulse`` for every ion, shape (n, 2, 2)."""
    lower, upper = ens.scheme.pair(pulse.transition)
    detunings = ens.pair_detunings(lower, upper)
    if is_exact(pulse):
        return propagate_many(driven_pulse(ens, pulse), detunings)
    table = table or TransferTable.for_ensemble(pulse, ens)
    return table.lookup(detunings)


def spatial_phase(ens: Ensemble, direction: tuple[float, float]) -> np.ndarray:
    """k·r of every ion for a beam travelling along ``direction``."""
    return ens.positions @ ens.geometry.wavevector(direction)


def apply_pulse(
    ens: Ensemble, pulse: PulseSpec, table: TransferTable | None = None
) -> Ensemble:
    """
    Apply ``pulse`` to every ion.

    The first signal pulse also stores the signal coherence, stripped of its
    spatial phase, as the calibration reference for emission.

    Raises:
        UnknownTransition: the pulse addresses a transition outside the scheme
    """
    lower, upper = ens.scheme.pair(pulse.transition)
    if driven_pulse(ens, pulse).is_null:
        return ens
    maps = transfer_maps(ens, pulse, table)
    phase = np.exp(1j * spatial_phase(ens, pulse.direction))

    n = ens.n
    embed = np.broadcast_to(np.eye(4, dtype=complex), (n, 4, 4)).copy()
    embed[:, lower, lower] = maps[:, 0, 0]
    embed[:, lower, upper] = maps[:, 0, 1] * np.conj(phase)
    embed[:, upper, lower] = maps[:, 1, 0] * phase
    embed[:, upper, upper] = maps[:, 1, 1]
    rho = embed @ ens.rho @ np.conj(np.swapaxes(embed, 1, 2))

    changes = {"rho": rho}
    if pulse.role == SIGNAL and ens.reference is None:
        changes["reference"] = rho[:, upper, lower] * np.conj(phase)
        changes["reference_detunings"] = ens.pair_detunings(lower, upper)
        changes["reference_span"] = pulse.half_support
    return ens.evolve(**changes)


def decay_factors(dt: float, params: MaterialParams) -> np.ndarray:
    """
    Multiplicative decay of every density-matrix element over ``dt``.

    The storage efficiency charges γ only to the interval t3 - t2, when the
    stored coherence sits on e3 after the π13 pair. The g-e5 coherence holds
    the signal before t1 and the echo after t4; damping it with γ would add a
    loss the efficiency does not contain, and the ensemble run is checked
    against that efficiency. It keeps the half-T1 rate only.
    """
    half_t1 = dt / (2 * params.t1_excited)
    factors = np.ones((4, 4))
    for excited in _EXCITED:
        gamma = params.gamma_opt if excited == E3 else 0.0
        optical = math.exp(-gamma * dt - half_t1)
        for ground in (G1, G3):
            factors[excited, ground] = factors[ground, excited] = optical
    population = math.exp(-dt / params.t1_excited)
    factors[E3, E3] = factors[E5, E5] = population
    factors[E3, E5] = factors[E5, E3] = population
    return factors


def free_evolution(ens: Ensemble, dt: float, params: MaterialParams) -> Ensemble:
    """
    Evolve freely for ``dt`` seconds.

    A fraction ``branching_e3_to_g3`` of the population leaving e3 lands in
    g3; the rest of the excited-state decay leaves the four-level system, so
    the trace may drop below one.
    """
    if dt < 0:
        raise ValueError(f"free evolution needs dt >= 0, got {dt}")
    if dt == 0:
        return ens
    energies = ens.energies()
    gaps = energies[:, :, None] - energies[:, None, :]
    rho = ens.rho * np.exp(-2j * math.pi * gaps * dt) * decay_factors(dt, params)
    leaked = np.real(ens.rho[:, E3, E3]) * (1.0 - math.exp(-dt / params.t1_excited))
    rho[:, G3, G3] += params.branching_e3_to_g3 * leaked
    return ens.evolve(rho=rho, time=ens.time + dt)
