"""
Augmentation: random horizontal flip and zero-padded random crop
"""

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from ..exceptions import ConfigError


@dataclass
class AugmentPolicy:
    """
    Attributes:
        horizontal_flip: probability an image is mirrored
        pad: zero padding on each side before cropping back to the original size
    """
    horizontal_flip: float = 0.5
    pad: int = 4

    def __post_init__(self):
        if not 0.0 <= self.horizontal_flip <= 1.0:
            raise ConfigError(f"augment.horizontal_flip must be in [0, 1], got {self.horizontal_flip}")
        if int(self.pad) != self.pad or self.pad < 0:
            raise ConfigError(f"augment.pad must be a non-negative integer, got {self.pad}")
        self.pad = int(self.pad)

    @classmethod
    def none(cls) -> 'AugmentPolicy':
        return cls(horizontal_flip=0.0, pad=0)

    @property
    def is_identity(self) -> bool:
        return self.horizontal_flip == 0.0 and self.pad == 0

    def to_dict(self) -> Dict[str, Any]:
        return {'horizontal_flip': self.horizontal_flip, 'pad': self.pad}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AugmentPolicy':
        data = dict(data or {})
        unknown = set(data) - {'horizontal_flip', 'pad'}
        if unknown:
            raise ConfigError(f"Unknown augment keys: {sorted(unknown)}")
        return cls(**data)


def flip_horizontal(images: np.ndarray) -> np.ndarray:
    """Mirror NCHW images left-right."""
    return images[..., ::-1]


def sample_crop_offsets(n: int, pad: int, rng: np.random.Generator) -> np.ndarray:
    """(n, 2) top-left (row, col) offsets, uniform over the (2*pad + 1)^2 positions."""
    return rng.integers(0, 2 * pad + 1, size=(n, 2))


def augment(batch: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    """
    Flip each image i.i.d. with ``policy.horizontal_flip``, then pad with zeros
    and crop back to the original size at a uniform offset.

    The identity policy returns ``batch`` untouched and draws nothing.
    """
    if policy.is_identity:
        return batch
    n, _, h, w = batch.shape
    out = batch.copy()

    if policy.horizontal_flip > 0:
        flips = rng.random(n) < policy.horizontal_flip
        out[flips] = flip_horizontal(out[flips])

    if policy.pad > 0:
        p = policy.pad
        padded = np.pad(out, ((0, 0), (0, 0), (p, p), (p, p)))
        offsets = sample_crop_offsets(n, p, rng)
        for i, (row, col) in enumerate(offsets):
            out[i] = padded[i, :, row:row + h, col:col + w]
    return out
