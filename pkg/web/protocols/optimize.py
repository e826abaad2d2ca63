"""
Timing optimization for the NLPE sequence.

The decision variables are the four gaps t1 - t0, t2 - t1, t3 - t2 and
t4 - t3 (t0 is pinned to zero). Each gap has a lower and an upper bound, the
echo must clear the last pulse by ``echo_clearance`` (t5 - t4 = (t3 - t2) -
(t1 - t0)), and the whole sequence up to the echo may be capped. The objective
is nlpe_efficiency; coordinates are improved one at a time with a line
search until a full sweep no longer helps.

The line search is scipy's bounded Brent method rather than a plain
golden-section search. It takes golden-section steps where its parabolic fit
is not trusted, so it keeps the same bracket on [low, high] and converges in
fewer evaluations; it never evaluates the ends of the interval, so both ends
are compared with its result afterwards.
"""

import logging
from dataclasses import dataclass

from scipy.optimize import minimize_scalar

from physmodel.material import MaterialParams

from .efficiency import nlpe_efficiency
from .exceptions import InfeasibleConstraints
from .sequences import NlpeTimings

logger = logging.getLogger(__name__)

DEFAULT_SPAN = 20e-6
MAX_SWEEPS = 50
# Shorter sequences win ties between gaps the efficiency does not depend on.
LENGTH_PENALTY = 1e-12
_US = 1e-6


@dataclass(frozen=True)
class TimingConstraints:
    min_gaps: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    max_gaps: tuple[float, float, float, float] | None = None
    echo_clearance: float = 0.0
    max_duration: float | None = None

    def bounds(self) -> list[tuple[float, float]]:
        highs = self.max_gaps or tuple(low + DEFAULT_SPAN for low in self.min_gaps)
        return list(zip(self.min_gaps, highs))


DEFAULT_CONSTRAINTS = TimingConstraints(
    min_gaps=(4.1e-6, 2.5e-6, 7.0e-6, 2.4e-6),
    echo_clearance=2.66e-6,
)


@dataclass(frozen=True)
class TimingOptimum:
    timings: NlpeTimings
    efficiency: float
    sweeps: int


def _timings(gaps) -> NlpeTimings:
    t = [0.0]
    for gap in gaps:
        t.append(t[-1] + gap)
    return NlpeTimings(*t)


def _check(constraints: TimingConstraints) -> list[tuple[float, float]]:
    bounds = constraints.bounds()
    for i, (low, high) in enumerate(bounds):
        if low < 0 or not low <= high:
            raise InfeasibleConstraints(f"gap {i} bounds [{low}, {high}] are not valid")
    if constraints.echo_clearance < 0:
        raise InfeasibleConstraints("echo_clearance must be nonnegative")
    return bounds


def _total(gaps) -> float:
    """Time from t0 to the echo: t5 = t4 + t3 - t2 - t1 + t0."""
    g01, g12, g23, g34 = gaps
    return g01 + g12 + g23 + g34 + (g23 - g01)


def optimize_timings(
    params: MaterialParams,
    constraints: TimingConstraints,
    eta_control: float = 1.0,
) -> TimingOptimum:
    """
    Maximize nlpe_efficiency over pulse timings.

    Raises:
        InfeasibleConstraints: no timings satisfy the bounds
    """
    bounds = _check(constraints)
    clearance = constraints.echo_clearance
    # zero gaps are not strictly monotone; nudge lower bounds just above zero
    bounds = [(max(low, 1e-12), max(high, 1e-12)) for low, high in bounds]
    gaps = [low for low, _ in bounds]
    gaps[2] = max(gaps[2], gaps[0] + clearance)
    if gaps[2] > bounds[2][1]:
        raise InfeasibleConstraints(
            f"t3 - t2 must reach {gaps[2]:.4g} s to clear the echo "
            f"but is capped at {bounds[2][1]:.4g} s"
        )
    limit = constraints.max_duration
    if limit is not None and _total(gaps) > limit:
        raise InfeasibleConstraints(
            f"shortest feasible sequence lasts {_total(gaps):.4g} s, "
            f"above {limit:.4g} s"
        )

    def objective(candidate) -> float:
        eta = nlpe_efficiency(params, _timings(candidate), eta_control)
        return -eta + LENGTH_PENALTY * _total(candidate) / _US

    def interval(i: int) -> tuple[float, float]:
        low, high = bounds[i]
        if i == 0:
            high = min(high, gaps[2] - clearance)
        if i == 2:
            low = max(low, gaps[0] + clearance)
        if limit is not None:
            others = list(gaps)
            others[i] = 0.0
            # _total is linear in each gap with slope 1, 1, 2, 1 (gap 0 cancels)
            slope = (0.0, 1.0, 2.0, 1.0)[i]
            if slope:
                high = min(high, (limit - _total(others)) / slope)
        return low, high

    best = objective(gaps)
    sweeps = 0
    for sweeps in range(1, MAX_SWEEPS + 1):
        start = best
        for i in range(4):
            low, high = interval(i)
            if high - low <= 0:
                continue

            def along(
                value: float, i: int = i, low: float = low, high: float = high
            ) -> float:
                trial = list(gaps)
                trial[i] = min(max(value, low), high)
                return objective(trial)

            def along_us(value_us: float, along=along) -> float:
                return along(value_us * _US)

            result = minimize_scalar(
                along_us,
                bounds=(low / _US, high / _US),
                method="bounded",
                options={"xatol": 1e-9},
            )
            # the bounded method never evaluates the endpoints themselves
            for candidate in (min(max(float(result.x) * _US, low), high), low, high):
                value = along(candidate)
                if value < best:
                    best = value
                    gaps[i] = candidate
        if start - best <= 1e-15:
            break

    timings = _timings(gaps)
    efficiency = nlpe_efficiency(params, timings, eta_control)
    logger.info(
        f"Optimized NLPE timings after {sweeps} sweeps: "
        f"η = {efficiency:.4g}, t5 = {timings.t5:.4g} s"
    )
    return TimingOptimum(timings, efficiency, sweeps)
