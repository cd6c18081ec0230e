"""
Base Regularizer Class
All dropout variants inherit from this
"""

from enum import Enum
from typing import List

import numpy as np

from ..autograd import Tensor


class DropoutMode(Enum):
    """Whether a regularizer is training (masking) or inferring (identity)"""
    TRAIN = "train"
    INFERENCE = "inference"


class BaseRegularizer:
    """Base class for feature-map regularizers inserted after a network stage"""

    def __init__(self, spec):
        self.spec = spec
        # FocusMask records from the last training call (focused variants only)
        self.last_masks: List = []

    def __call__(self, batch: Tensor, mode: DropoutMode, rng: np.random.Generator) -> Tensor:
        """
        Apply the regularizer to an NCHW batch

        Args:
            batch: activations (N, C, H, W)
            mode: DropoutMode.INFERENCE returns ``batch`` itself
            rng: regularizer stream; per-sample streams are derived from it

        Returns:
            Regularized activations
        """
        self.last_masks = []
        if mode is DropoutMode.INFERENCE:
            return batch
        return self.apply(batch, rng)

    def apply(self, batch: Tensor, rng: np.random.Generator) -> Tensor:
        raise NotImplementedError("Subclasses must implement apply()")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec.describe()})"
