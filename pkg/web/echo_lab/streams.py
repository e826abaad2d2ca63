"""
Deterministic random streams and reductions shared by the Monte-Carlo engines.

Work is cut into fixed-size blocks. Block ``b`` always draws from its own
counter-based generator, and partial results are combined with a pairwise tree
whose shape depends only on the number of blocks, so the outcome is the same
for any number of worker threads.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def block_generator(
    seed: int, block: int, stream: int | None = None
) -> np.random.Generator:
    """
    Return the generator owning block ``block`` of a run seeded with ``seed``.

    Independent runs sharing one seed pass distinct ``stream`` keys.
    """
    key = (block,) if stream is None else (stream, block)
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(sequence))


def block_bounds(total: int, block_size: int) -> list[tuple[int, int]]:
    """Split ``range(total)`` into consecutive ``[start, stop)`` blocks."""
    if block_size < 1:
        raise ValueError(f"block_size must be >= 1, got {block_size}")
    return [
        (start, min(start + block_size, total))
        for start in range(0, total, block_size)
    ]


def tree_reduce(items: Sequence[T], combine: Callable[[T, T], T]) -> T:
    """
    Combine ``items`` pairwise, neighbours first, in index order.

    Args:
        items: Partial results ordered by block index; must not be empty
        combine: Associative combination of two partial results
    """
    if not items:
        raise ValueError("tree_reduce needs at least one item")
    level = list(items)
    while len(level) > 1:
        paired = [combine(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            paired.append(level[-1])
        level = paired
    return level[0]


def map_blocks(func: Callable[[int], R], n_blocks: int, workers: int = 1) -> list[R]:
    """
    Evaluate ``func(block)`` for every block, returning results in block order.

    Args:
        func: Work for one block; must only touch data owned by that block
        n_blocks: Number of blocks
        workers: Thread count; ``1`` runs inline
    """
    if workers <= 1 or n_blocks <= 1:
        return [func(block) for block in range(n_blocks)]
    logger.debug(f"Dispatching {n_blocks} blocks over {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, range(n_blocks)))
