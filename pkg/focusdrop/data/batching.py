"""
Mini-batch iteration
"""

import math
from typing import Iterator, Optional, Tuple

import numpy as np

from .dataset import Dataset


def num_batches(n: int, batch_size: int) -> int:
    return math.ceil(n / batch_size)


def iterate_batches(dataset: Dataset, batch_size: int, rng: Optional[np.random.Generator] = None,
                    shuffle: bool = True) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """
    Yield (images, labels) covering every sample exactly once

    Shuffled with ``rng`` (one permutation per call, so one per epoch);
    the last batch may be smaller.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    n = len(dataset)
    if shuffle:
        if rng is None:
            raise ValueError("shuffle=True requires an rng")
        order = rng.permutation(n)
    else:
        order = np.arange(n)
    for start in range(0, n, batch_size):
        index = order[start:start + batch_size]
        yield dataset.images[index], dataset.labels[index]
