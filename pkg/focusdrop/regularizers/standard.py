"""
Random dropout baselines

Standard dropout zeroes individual units, SpatialDropout zeroes whole
channels. Both use inverted-dropout scaling: survivors are multiplied by
1/(1-p) at train time so inference is the identity.
"""

import numpy as np

from ..autograd import Tensor
from ..exceptions import ShapeError
from ..random_streams import sample_streams
from .base_regularizer import BaseRegularizer, DropoutMode


def _check_probability(p: float):
    if not 0.0 <= p < 1.0:
        raise ValueError(f"drop probability must be in [0, 1), got {p}")


def standard_dropout(batch: Tensor, p: float, mode: DropoutMode, rng: np.random.Generator) -> Tensor:
    """Zero each unit independently with probability p."""
    _check_probability(p)
    if mode is DropoutMode.INFERENCE or p == 0.0:
        return batch

    unit_shape = batch.shape[1:]
    keep = np.stack([stream.random(unit_shape) >= p for stream in sample_streams(rng, batch.shape[0])])
    scale = batch.dtype.type(1.0 / (1.0 - p))
    return batch * Tensor(keep.astype(batch.dtype) * scale, dtype=batch.dtype)


def spatial_dropout(batch: Tensor, p: float, mode: DropoutMode, rng: np.random.Generator) -> Tensor:
    """Zero whole channels of each sample with probability p."""
    _check_probability(p)
    if batch.ndim != 4:
        raise ShapeError(f"spatial dropout expects a 4-D NCHW batch, got {batch.shape}")
    if mode is DropoutMode.INFERENCE or p == 0.0:
        return batch

    n, c = batch.shape[:2]
    keep = np.stack([stream.random(c) >= p for stream in sample_streams(rng, n)]).reshape(n, c, 1, 1)
    scale = batch.dtype.type(1.0 / (1.0 - p))
    return batch * Tensor(keep.astype(batch.dtype) * scale, dtype=batch.dtype)


class StandardDropout(BaseRegularizer):
    def apply(self, batch: Tensor, rng: np.random.Generator) -> Tensor:
        return standard_dropout(batch, self.spec.p, DropoutMode.TRAIN, rng)


class SpatialDropout(BaseRegularizer):
    def apply(self, batch: Tensor, rng: np.random.Generator) -> Tensor:
        return spatial_dropout(batch, self.spec.p, DropoutMode.TRAIN, rng)
