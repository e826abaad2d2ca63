import logging
import math

import numpy as np

from echo_lab.streams import block_bounds, block_generator
from physmodel.geometry import Geometry
from physmodel.levels import LevelScheme
from physmodel.material import MaterialParams
from physmodel.spectra import SpectralProfile

from .ensemble import Ensemble

logger = logging.getLogger(__name__)

ION_BLOCK_SIZE = 4096
FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))


def ground_state(n: int) -> np.ndarray:
    rho = np.zeros((n, 4, 4), dtype=complex)
    rho[:, 0, 0] = 1.0
    return rho


def sample_ensemble(
    n: int,
    profile: SpectralProfile,
    params: MaterialParams,
    geometry: Geometry,
    seed: int,
    scheme: LevelScheme | None = None,
    block_size: int = ION_BLOCK_SIZE,
) -> Ensemble:
    """
    Draw ``n`` ions, all in g1.

    Ions are drawn in fixed blocks; block ``b`` uses its own counter-based
    stream and always draws, in order, the profile uniforms, the ground and
    excited spin detunings and the two position coordinates. The same seed
    therefore reproduces the same ions whatever else changes in a run.

    Raises:
        UnnormalizedProfile: if the profile weights do not sum to one
    """
    if n < 1:
        raise ValueError(f"ion count must be >= 1, got {n}")
    profile.require_normalized()
    sigma_g = params.gamma13 / FWHM_PER_SIGMA
    sigma_e = params.gamma35bar / FWHM_PER_SIGMA

    delta_opt = np.empty(n)
    delta_g = np.empty(n)
    delta_e = np.empty(n)
    positions = np.empty((n, 2))
    for block, (start, stop) in enumerate(block_bounds(n, block_size)):
        rng = block_generator(seed, block)
        size = stop - start
        delta_opt[start:stop] = profile.sample(rng.random(size))
        delta_g[start:stop] = rng.normal(0.0, sigma_g, size)
        delta_e[start:stop] = rng.normal(0.0, sigma_e, size)
        positions[start:stop, 0] = rng.random(size) * geometry.sample_length
        positions[start:stop, 1] = (rng.random(size) - 0.5) * geometry.beam_waist

    logger.debug(f"Sampled {n} ions with seed {seed}")
    return Ensemble(
        delta_opt=delta_opt,
        delta_g=delta_g,
        delta_e=delta_e,
        positions=positions,
        rho=ground_state(n),
        seed=seed,
        geometry=geometry,
        scheme=scheme or LevelScheme.default(),
    )
