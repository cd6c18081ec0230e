"""
Named random streams

Every consumer of randomness (dataset synthesis, shuffling, augmentation,
parameter init, batch planning, regularizer masks) draws from its own
generator so that one consumer never shifts another's sequence.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

# Stable ids mixed into the seed; never reorder.
STREAM_IDS = {
    'dataset': 1,
    'data': 2,
    'augment': 3,
    'init': 4,
    'reg': 5,
    'plan': 6,
}


def make_stream(seed: int, name: str, *salt: int) -> np.random.Generator:
    """Generator for the named stream under ``seed``; ``salt`` splits it further (e.g. per split)."""
    if name not in STREAM_IDS:
        raise KeyError(f"Unknown random stream '{name}'. Known: {sorted(STREAM_IDS)}")
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAM_IDS[name], *map(int, salt)]))


def sample_streams(rng: np.random.Generator, count: int) -> List[np.random.Generator]:
    """
    Derive one child generator per sample.

    A single key is drawn from ``rng`` and the sample index is mixed into it,
    so sample i's draws do not depend on how many draws other samples make or
    on the order in which samples are processed.
    """
    key = int(rng.integers(0, 2 ** 63 - 1))
    return [np.random.default_rng([key, index]) for index in range(count)]


@dataclass
class RandomStreams:
    """Generators for one training run"""
    data: np.random.Generator
    augment: np.random.Generator
    init: np.random.Generator
    reg: np.random.Generator
    plan: np.random.Generator

    @classmethod
    def from_seeds(cls, data_seed: int, init_seed: int, reg_seed: int) -> 'RandomStreams':
        return cls(
            data=make_stream(data_seed, 'data'),
            augment=make_stream(data_seed, 'augment'),
            init=make_stream(init_seed, 'init'),
            reg=make_stream(reg_seed, 'reg'),
            plan=make_stream(reg_seed, 'plan'),
        )
