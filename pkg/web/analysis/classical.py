"""
Measure-and-prepare bound on the storage fidelity.

A classical device that detects N photons of a qubit can re-prepare it with
fidelity (N + 1)/(N + 2). If it may only answer in a fraction
``response_prob`` of trials, it answers on the largest photon numbers first.
"""

import itertools
import logging
import math

import numpy as np
from scipy.stats import poisson

from .exceptions import InvalidBudget

logger = logging.getLogger(__name__)

# Fitted once so that μ = 2.29 gives the classical limit of 0.880; frozen.
CLASSICAL_RESPONSE_BUDGET = 0.030
TAIL_TOLERANCE = 1e-16


def event_fidelity(n: np.ndarray) -> np.ndarray:
    return (n + 1) / (n + 2)


def _photon_numbers(mu: float, n_max: int | None) -> tuple[np.ndarray, np.ndarray]:
    if not mu > 0:
        raise InvalidBudget(f"mean photon number must be positive, got {mu}")
    if n_max is None:
        n_max = int(poisson.isf(TAIL_TOLERANCE, mu)) + 1
    numbers = np.arange(1, n_max + 1)
    return numbers, poisson.pmf(numbers, mu)


def _check(response_prob: float, available: float) -> None:
    if not 0.0 < response_prob <= 1.0:
        raise InvalidBudget(f"response probability {response_prob} is outside (0, 1]")
    if response_prob > available * (1 + 1e-9):
        raise InvalidBudget(
            f"response probability {response_prob:.4g} exceeds the probability "
            f"{available:.4g} of detecting a photon"
        )


def classical_bound(
    mu: float,
    response_prob: float = CLASSICAL_RESPONSE_BUDGET,
    n_max: int | None = None,
) -> float:
    """
    Best mean fidelity of the threshold strategy.

    Events are accepted from the largest photon number down until their total
    probability reaches ``response_prob``; the marginal photon number is
    accepted in part. Photon numbers above ``n_max`` never occur.

    Raises:
        InvalidBudget: μ <= 0, the budget is outside (0, 1], or it exceeds
            the probability of detecting at least one photon
    """
    numbers, probabilities = _photon_numbers(mu, n_max)
    _check(response_prob, float(probabilities.sum()))
    remaining = response_prob
    value = 0.0
    for n, p in zip(numbers[::-1], probabilities[::-1]):
        taken = min(p, remaining)
        value += taken * event_fidelity(n)
        remaining -= taken
        if remaining <= 0:
            break
    return float(value / response_prob)


def classical_bound_bruteforce(
    mu: float, response_prob: float, n_max: int = 12
) -> float:
    """
    Optimum over every response vector with photon numbers up to ``n_max``.

    The optimum of this linear program sits on a vertex: every photon number
    is accepted fully or not at all except at most one. All such vertices are
    enumerated.
    """
    numbers, probabilities = _photon_numbers(mu, n_max)
    _check(response_prob, float(probabilities.sum()))
    fidelities = event_fidelity(numbers)
    subsets = np.array(list(itertools.product((0.0, 1.0), repeat=numbers.size)))
    full_mass = subsets @ probabilities
    full_value = subsets @ (probabilities * fidelities)
    best = -math.inf
    for k in range(numbers.size):
        rest = response_prob - full_mass
        feasible = (subsets[:, k] == 0) & (rest >= -1e-15) & (rest <= probabilities[k])
        if np.any(feasible):
            values = full_value[feasible] + rest[feasible] * fidelities[k]
            best = max(best, float(values.max()))
    logger.debug(f"Enumerated {subsets.shape[0] * numbers.size} response vertices")
    return best / response_prob
