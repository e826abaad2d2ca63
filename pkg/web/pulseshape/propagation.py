"""
Two-level transfer maps.

The Schrödinger equation is solved in the interaction picture of the detuning,
referenced to the pulse center. A pulse therefore acts as an instantaneous map
at its center time and a vanishing pulse is exactly the identity. Basis order
is (lower, upper); the coupling is H = 2π[[-Δ/2, Ω*/2], [Ω/2, Δ/2]].
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import IntegrationFailure
from .shapes import IdealShape, PulseSpec, envelope_array

logger = logging.getLogger(__name__)

RTOL = 1e-8
ATOL = 1e-10
MIN_STEPS_PER_SUPPORT = 100
UNITARITY_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class TransferMap:
    matrix: np.ndarray

    @property
    def transfer_probability(self) -> float:
        return float(abs(self.matrix[1, 0]) ** 2)

    def unitarity_error(self) -> float:
        return unitarity_drift(self.matrix[None])

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(amplitudes, dtype=complex)


def rotation(area: float, phase: float) -> np.ndarray:
    """Exact resonant rotation by ``area`` about an axis at azimuth ``phase``."""
    c = math.cos(area / 2)
    s = math.sin(area / 2)
    return np.array(
        [[c, -1j * np.exp(-1j * phase) * s], [-1j * np.exp(1j * phase) * s, c]],
        dtype=complex,
    )


def nearest_unitary(maps: np.ndarray) -> np.ndarray:
    """Project a stack of 2×2 matrices onto the closest unitaries (polar factor)."""
    u, _, vh = np.linalg.svd(maps)
    return u @ vh


def unitarity_drift(maps: np.ndarray) -> float:
    """Largest entry of |U†U - I| over a stack of 2×2 matrices."""
    product = np.conj(np.swapaxes(maps, -1, -2)) @ maps
    return float(np.max(np.abs(product - np.eye(2))))


def project_unitary(maps: np.ndarray, label: str) -> np.ndarray:
    """
    ``nearest_unitary`` of ``maps``, reporting how far they were from unitary.

    Drift above ``UNITARITY_TOLERANCE`` is an integration error the projection
    would otherwise hide, and is logged as a warning.
    """
    drift = unitarity_drift(maps)
    if drift > UNITARITY_TOLERANCE:
        logger.warning(f"{label} maps drift {drift:.2e} from unitary before projection")
    else:
        logger.debug(f"{label} maps drift {drift:.2e} from unitary")
    return nearest_unitary(maps)


def _derivative(spec: PulseSpec, detunings: np.ndarray):
    def rhs(t, y):
        u = y.reshape(-1, 2, 2)
        tau = t - spec.center_time
        omega = envelope_array(spec, np.array([t]))[0]
        h10 = math.pi * omega * np.exp(2j * math.pi * detunings * tau)
        h01 = np.conj(h10)
        du = np.empty_like(u)
        du[:, 0, :] = -1j * h01[:, None] * u[:, 1, :]
        du[:, 1, :] = -1j * h10[:, None] * u[:, 0, :]
        return du.reshape(-1)

    return rhs


def _trivial_maps(spec: PulseSpec, count: int) -> np.ndarray | None:
    if spec.is_null:
        return np.broadcast_to(np.eye(2, dtype=complex), (count, 2, 2)).copy()
    if isinstance(spec.shape, IdealShape):
        single = rotation(spec.nominal_area, spec.phase)
        return np.broadcast_to(single, (count, 2, 2)).copy()
    return None


def propagate_many(spec: PulseSpec, detunings: np.ndarray) -> np.ndarray:
    """
    Transfer maps of ``spec`` for every detuning (Hz), shape (m, 2, 2).

    Raises:
        IntegrationFailure: if the adaptive integrator cannot finish
    """
    detunings = np.atleast_1d(np.asarray(detunings, dtype=float))
    trivial = _trivial_maps(spec, detunings.size)
    if trivial is not None:
        return trivial

    start, stop = spec.support
    y0 = np.broadcast_to(np.eye(2, dtype=complex), (detunings.size, 2, 2)).reshape(-1)
    solution = solve_ivp(
        _derivative(spec, detunings),
        (start, stop),
        y0.copy(),
        method="DOP853",
        rtol=RTOL,
        atol=ATOL,
        max_step=(stop - start) / MIN_STEPS_PER_SUPPORT,
    )
    if not solution.success:
        logger.error(
            f"Pulse integration failed on {spec.transition}: {solution.message}"
        )
        raise IntegrationFailure(solution.message)
    maps = solution.y[:, -1].reshape(-1, 2, 2)
    return project_unitary(maps, f"{spec.transition} pulse")


def propagate_two_level(spec: PulseSpec, detuning: float) -> TransferMap:
    return TransferMap(propagate_many(spec, np.array([detuning]))[0])


def propagate_fixed_step(
    spec: PulseSpec, detunings: np.ndarray, steps: int
) -> np.ndarray:
    """
    Classic RK4 with a fixed step over the pulse support.

    Kept independent of the adaptive path as a cross-check; no unitary
    projection is applied.
    """
    detunings = np.atleast_1d(np.asarray(detunings, dtype=float))
    trivial = _trivial_maps(spec, detunings.size)
    if trivial is not None:
        return trivial
    rhs = _derivative(spec, detunings)
    start, stop = spec.support
    h = (stop - start) / steps
    y = np.broadcast_to(np.eye(2, dtype=complex), (detunings.size, 2, 2)).reshape(-1)
    y = y.copy()
    t = start
    for step in range(steps):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = start + (step + 1) * h
    return y.reshape(-1, 2, 2)


def transfer_probabilities(spec: PulseSpec, detunings: np.ndarray) -> np.ndarray:
    """Population moved from lower to upper level, per detuning."""
    maps = propagate_many(spec, detunings)
    return np.clip(np.abs(maps[:, 1, 0]) ** 2, 0.0, 1.0)
