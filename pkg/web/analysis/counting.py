"""
Photon-counting Monte-Carlo.

Each trial draws independent Poisson counts per time bin. Trials are cut into
fixed chunks; chunk ``c`` draws from its own counter-based stream, so a
histogram depends only on the seed and never on the thread count.
"""

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django.conf import settings

from echo_lab.streams import block_bounds, block_generator, map_blocks, tree_reduce
from noisebudget.budget import snr

from .exceptions import AnalysisError

logger = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH = 262e-9
TRIAL_CHUNK = 8192
CSV_HEADER = ("bin_start", "counts")


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    trials: int
    with_input: bool = True
    mu: float = 0.0
    eta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.counts.shape != (self.bin_edges.size - 1,):
            raise AnalysisError("a histogram needs one more edge than bins")
        if np.any(self.counts < 0):
            raise AnalysisError("histogram counts must be nonnegative")

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def bin_starts(self) -> np.ndarray:
        return self.bin_edges[:-1]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def metadata(self) -> dict:
        return {
            "mu": self.mu,
            "eta": self.eta,
            "trials": self.trials,
            "seed": self.seed,
            "with_input": self.with_input,
            "bin_width": self.bin_width,
        }

    def to_csv(self, path: Path | str) -> Path:
        path = Path(path)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for start, count in zip(self.bin_starts, self.counts):
                writer.writerow((repr(float(start)), int(count)))
        return path

    def metadata_to_json(self, path: Path | str) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return path


def uniform_edges(
    bins: int, bin_width: float = DEFAULT_BIN_WIDTH, start: float = 0.0
) -> np.ndarray:
    return start + bin_width * np.arange(bins + 1)


def expected_counts(
    signal_shape: np.ndarray, noise: float | np.ndarray, mu: float, eta: float
) -> np.ndarray:
    """
    Mean counts per trial and bin: μ·η·shape + noise.

    ``signal_shape`` gives the fraction of the retrieved signal in each bin;
    ``noise`` is photons per bin, scalar or per bin.
    """
    shape = np.asarray(signal_shape, dtype=float)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), shape.shape)
    if mu < 0 or eta < 0 or np.any(shape < 0) or np.any(noise < 0):
        raise AnalysisError("mean photon numbers must be nonnegative")
    return mu * eta * shape + noise


def _check_trials(trials: int) -> None:
    if trials < 1:
        raise AnalysisError(f"trials must be >= 1, got {trials}")


def _draw(
    means: np.ndarray,
    bounds: tuple[int, int],
    seed: int,
    chunk: int,
    stream: int | None,
    max_photons: int | None,
) -> np.ndarray:
    rng = block_generator(seed, chunk, stream)
    counts = rng.poisson(means, size=(bounds[1] - bounds[0], means.size))
    if max_photons is not None:
        counts = np.minimum(counts, max_photons)
    return counts


def sample_trial_counts(
    means: np.ndarray,
    trials: int,
    seed: int,
    stream: int | None = None,
    max_photons: int | None = None,
    chunk_size: int = TRIAL_CHUNK,
) -> np.ndarray:
    """Per-trial counts, shape (trials, bins)."""
    _check_trials(trials)
    means = np.asarray(means, dtype=float)
    chunks = block_bounds(trials, chunk_size)
    return np.concatenate(
        [
            _draw(means, bounds, seed, chunk, stream, max_photons)
            for chunk, bounds in enumerate(chunks)
        ]
    )


def count_histogram(
    means: np.ndarray,
    trials: int,
    seed: int,
    stream: int | None = None,
    max_photons: int | None = None,
    workers: int | None = None,
    chunk_size: int = TRIAL_CHUNK,
) -> np.ndarray:
    """
    Counts summed over ``trials`` for the given per-trial means.

    Equal to summing :func:`sample_trial_counts` but never holds more than one
    chunk per worker in memory.
    """
    _check_trials(trials)
    means = np.asarray(means, dtype=float)
    if np.any(means < 0):
        raise AnalysisError("mean counts must be nonnegative")
    chunks = block_bounds(trials, chunk_size)
    workers = workers or settings.ECHO_LAB_THREADS

    def chunk_sum(chunk: int) -> np.ndarray:
        draws = _draw(means, chunks[chunk], seed, chunk, stream, max_photons)
        return draws.sum(axis=0)

    partial = map_blocks(chunk_sum, len(chunks), workers)
    return tree_reduce(partial, np.add)


def simulate_counts(
    signal_shape: np.ndarray,
    noise: float | np.ndarray,
    mu: float,
    eta: float,
    trials: int,
    seed: int,
    bin_edges: np.ndarray | None = None,
    stream: int | None = None,
    max_photons: int | None = None,
    workers: int | None = None,
) -> Histogram:
    """
    Photon-counting histogram over ``trials`` repetitions.

    Args:
        signal_shape: Fraction of the retrieved photon in each bin
        noise: Noise photons per bin and trial
        mu: Mean input photon number; zero gives the no-input histogram
        eta: Retrieval efficiency seen by the detector
        trials: Number of repetitions, at least one
        seed: Root seed of the counter-based streams
        bin_edges: Bin edges in s; defaults to 262 ns bins starting at zero
        stream: Key separating independent histograms drawn from one seed
        max_photons: Optional per-bin cap on counts in one trial
    """
    means = expected_counts(signal_shape, noise, mu, eta)
    if bin_edges is None:
        bin_edges = uniform_edges(means.size)
    counts = count_histogram(means, trials, seed, stream, max_photons, workers)
    logger.debug(f"Simulated {trials} trials: {int(counts.sum())} counts")
    return Histogram(
        np.asarray(bin_edges, dtype=float),
        counts.astype(np.int64),
        trials,
        mu > 0,
        float(mu),
        float(eta),
        seed,
    )


def window_counts(histogram: Histogram, start: float, stop: float) -> int:
    """Counts in bins whose centers lie inside [start, stop)."""
    centers = 0.5 * (histogram.bin_edges[1:] + histogram.bin_edges[:-1])
    inside = (centers >= start) & (centers < stop)
    return int(histogram.counts[inside].sum())


def empirical_snr(
    with_input: Histogram, without_input: Histogram, start: float, stop: float
) -> tuple[float, float]:
    """
    Signal-to-noise ratio of a window and its one-σ Poisson error.

    Signal counts are the input counts minus the no-input counts of the same
    window; both runs must use the same number of trials.

    Raises:
        ZeroNoise: the no-input run has no counts in the window
    """
    if with_input.trials != without_input.trials:
        raise AnalysisError("signal and noise runs need the same trial count")
    total = window_counts(with_input, start, stop)
    noise = window_counts(without_input, start, stop)
    signal = max(total - noise, 0)
    ratio = snr(signal, noise)
    error = ratio * np.sqrt((total + noise) / max(signal, 1) ** 2 + 1.0 / noise)
    return ratio, float(error)
