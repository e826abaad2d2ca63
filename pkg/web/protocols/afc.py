"""Forward-retrieval atomic frequency comb with square teeth, as a baseline."""

import logging

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import ProtocolError

logger = logging.getLogger(__name__)

FINESSE_RANGE = (1.0, 20.0)
SCAN_POINTS = 2000


def afc_efficiency(d: float, finesse):
    """(d/F)² e^{-d/F} sinc²(π/F); ``finesse`` may be an array."""
    finesse = np.asarray(finesse, dtype=float)
    effective = d / finesse
    # np.sinc(x) is sin(πx)/(πx)
    value = effective**2 * np.exp(-effective) * np.sinc(1.0 / finesse) ** 2
    return float(value) if value.ndim == 0 else value


def afc_optimal_efficiency(d: float) -> tuple[float, float]:
    """Return (F*, η*) maximizing afc_efficiency over F in (1, 20]."""
    if not d > 0:
        raise ProtocolError(f"absorption depth must be positive, got {d}")
    low, high = FINESSE_RANGE
    grid = np.linspace(low, high, SCAN_POINTS + 1)[1:]
    values = afc_efficiency(d, grid)
    best = int(np.argmax(values))
    step = grid[1] - grid[0]
    bracket = (max(grid[best] - step, low + 1e-12), min(grid[best] + step, high))
    result = minimize_scalar(
        lambda f: -afc_efficiency(d, f),
        bounds=bracket,
        method="bounded",
        options={"xatol": 1e-10},
    )
    finesse = float(result.x)
    efficiency = afc_efficiency(d, finesse)
    if efficiency < values[best]:
        finesse, efficiency = float(grid[best]), float(values[best])
    logger.debug(f"AFC optimum for d = {d}: F = {finesse:.4f}, η = {efficiency:.4g}")
    return finesse, efficiency
