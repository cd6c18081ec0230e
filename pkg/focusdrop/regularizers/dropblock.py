"""
DropBlock

Drops contiguous block_size x block_size squares. Seed positions are drawn
only where a whole block fits, at the rate from the original DropBlock
formulation, so the expected dropped fraction is about 1 - keep_prob. One
mask per sample, shared over channels; survivors are rescaled by
mask size / kept count.
"""

import numpy as np

from ..autograd import Tensor
from ..exceptions import ShapeError
from ..random_streams import sample_streams
from .base_regularizer import BaseRegularizer, DropoutMode


def seed_rate(keep_prob: float, block_size: int, height: int, width: int) -> float:
    """Per-position Bernoulli rate for block seeds."""
    valid = (height - block_size + 1) * (width - block_size + 1)
    return (1.0 - keep_prob) / (block_size ** 2) * (height * width) / valid


def block_keep_mask(seeds: np.ndarray, block_size: int, height: int, width: int) -> np.ndarray:
    """Expand a (H-b+1, W-b+1) seed grid into a (H, W) keep mask."""
    dropped = np.zeros((height, width), dtype=bool)
    rows, cols = seeds.shape
    for di in range(block_size):
        for dj in range(block_size):
            dropped[di:di + rows, dj:dj + cols] |= seeds
    return ~dropped


def dropblock(batch: Tensor, block_size: int, keep_prob: float, mode: DropoutMode,
              rng: np.random.Generator) -> Tensor:
    """
    DropBlock over an NCHW batch

    Raises:
        ValueError: keep_prob outside (0, 1] or block_size < 1
        ShapeError: block larger than the feature map
    """
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if block_size < 1:
        raise ValueError(f"block_size must be >= 1, got {block_size}")
    if batch.ndim != 4:
        raise ShapeError(f"dropblock expects a 4-D NCHW batch, got {batch.shape}")
    n, _, height, width = batch.shape
    if block_size > min(height, width):
        raise ShapeError(f"block_size {block_size} does not fit feature map {height}x{width}")
    if mode is DropoutMode.INFERENCE or keep_prob == 1.0:
        return batch

    rate = min(seed_rate(keep_prob, block_size, height, width), 1.0)
    seed_shape = (height - block_size + 1, width - block_size + 1)
    masks = np.empty((n, 1, height, width), dtype=batch.dtype)
    for i, stream in enumerate(sample_streams(rng, n)):
        keep = block_keep_mask(stream.random(seed_shape) < rate, block_size, height, width)
        kept = np.count_nonzero(keep)
        scale = keep.size / kept if kept else 0.0
        masks[i, 0] = keep * scale
    return batch * Tensor(masks, dtype=batch.dtype)


class DropBlock(BaseRegularizer):
    def apply(self, batch: Tensor, rng: np.random.Generator) -> Tensor:
        return dropblock(batch, self.spec.block_size, self.spec.keep_prob, DropoutMode.TRAIN, rng)
