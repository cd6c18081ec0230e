"""
Synthetic pattern dataset

Class-conditional geometric shapes (bars at several orientations, blobs,
rings, crosses, ...) at a random position and colour on a noisy background.
Position and colour vary per image, so the classes are not linearly
separable in pixel space, while a small CNN learns them in seconds.
"""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from ..random_streams import make_stream
from .dataset import DataSplits, Dataset, Normalization

logger = logging.getLogger(__name__)

SPLIT_SALT = {'train': 0, 'test': 1}

# Each pattern maps (dy, dx, half_length, half_thickness) grids to a boolean shape
Pattern = Callable[[np.ndarray, np.ndarray, float, float], np.ndarray]


def _bar(along: np.ndarray, across: np.ndarray, length: float, thickness: float) -> np.ndarray:
    return (np.abs(across) <= thickness) & (np.abs(along) <= length)


def _ring(dy, dx, length, thickness):
    radius = np.hypot(dy, dx)
    return np.abs(radius - 0.8 * length) <= 0.75 * thickness


PATTERNS: Dict[str, Pattern] = {
    'horizontal_bar': lambda dy, dx, l, t: _bar(dx, dy, l, t),
    'vertical_bar': lambda dy, dx, l, t: _bar(dy, dx, l, t),
    'diagonal_bar': lambda dy, dx, l, t: _bar((dy + dx) / np.sqrt(2), (dy - dx) / np.sqrt(2), l, t),
    'blob': lambda dy, dx, l, t: np.hypot(dy, dx) <= 0.6 * l,
    'ring': _ring,
    'anti_diagonal_bar': lambda dy, dx, l, t: _bar((dy - dx) / np.sqrt(2), (dy + dx) / np.sqrt(2), l, t),
    'cross': lambda dy, dx, l, t: _bar(dx, dy, l, t) | _bar(dy, dx, l, t),
    'square': lambda dy, dx, l, t: np.abs(np.maximum(np.abs(dy), np.abs(dx)) - 0.7 * l) <= 0.5 * t,
    'two_dots': lambda dy, dx, l, t: (np.hypot(dy, dx - 0.6 * l) <= 1.2 * t) | (np.hypot(dy, dx + 0.6 * l) <= 1.2 * t),
    'corner': lambda dy, dx, l, t: (_bar(dx, dy, l, t) & (dx <= 0)) | (_bar(dy, dx, l, t) & (dy <= 0)),
}

PATTERN_NAMES: List[str] = list(PATTERNS)


def render_pattern(name: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """One (3, size, size) image in [0, 1] showing pattern ``name``."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = rng.uniform(0.3 * size, 0.7 * size, size=2)
    length = rng.uniform(0.25, 0.35) * size
    thickness = max(1.0, size / 16.0)
    shape = PATTERNS[name](yy - cy, xx - cx, length, thickness)

    background = rng.uniform(0.1, 0.4, size=3)
    foreground = rng.uniform(0.65, 1.0, size=3)
    image = background[:, None, None] + rng.normal(0.0, 0.06, size=(3, size, size))
    image[:, shape] = foreground[:, None] + rng.normal(0.0, 0.06, size=(3, int(shape.sum())))
    return np.clip(image, 0.0, 1.0)


def make_synthetic(classes: int, n_per_class: int, size: int, seed: int, split: str = 'train') -> Dataset:
    """
    Balanced synthetic dataset of raw [0, 1] images

    Args:
        classes: number of classes (at most len(PATTERN_NAMES))
        n_per_class: images per class; labels are balanced exactly
        size: image side, >= 8
        seed: dataset seed; the same (seed, split) always gives the same data
        split: 'train' or 'test', drawn from separate streams
    """
    if size < 8:
        raise ValueError(f"synthetic image size must be >= 8, got {size}")
    if not 2 <= classes <= len(PATTERN_NAMES):
        raise ValueError(f"synthetic classes must be in [2, {len(PATTERN_NAMES)}], got {classes}")
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")

    rng = make_stream(seed, 'dataset', SPLIT_SALT[split])
    labels = np.repeat(np.arange(classes), n_per_class)
    images = np.stack([render_pattern(PATTERN_NAMES[label], size, rng) for label in labels])
    order = rng.permutation(len(labels))

    return Dataset(
        images=images[order].astype(np.float32), labels=labels[order], num_classes=classes,
        split=split, source='synthetic', seed=seed
    )


def make_synthetic_splits(classes: int, n_per_class: int, size: int, seed: int,
                          test_per_class: Optional[int] = None,
                          normalization: Optional[Normalization] = None) -> DataSplits:
    """Train split of ``n_per_class`` and test split of ``test_per_class`` (default a third) per class."""
    test_per_class = test_per_class or max(1, n_per_class // 3)
    train = make_synthetic(classes, n_per_class, size, seed, 'train')
    test = make_synthetic(classes, test_per_class, size, seed, 'test')
    logger.info(f"Synthetic {classes}-class {size}x{size}: {len(train)} train / {len(test)} test (seed {seed})")
    return DataSplits.from_raw(train, test, normalization)
