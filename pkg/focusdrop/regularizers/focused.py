"""
FocusedDropout

Per sample: pick the channel with the highest mean activation as reference,
threshold it at a random fraction γ of its peak, and keep only the spatial
positions above the threshold in every channel. Inference is the identity.

The Opposite variant drops the focused area and keeps everything else.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autograd import Tensor
from ..exceptions import ConfigError, ShapeError
from ..random_streams import sample_streams
from .base_regularizer import BaseRegularizer, DropoutMode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GammaRange:
    """Range γ is drawn from, uniformly; lo == hi gives a fixed γ"""
    lo: float = 0.3
    hi: float = 0.6

    def __post_init__(self):
        if not (0.0 < self.lo <= self.hi < 1.0):
            raise ConfigError(f"gamma range must satisfy 0 < lo <= hi < 1, got ({self.lo}, {self.hi})")

    @classmethod
    def moderate(cls) -> 'GammaRange':
        """0.3-0.6 (default)."""
        return cls(0.3, 0.6)

    @classmethod
    def aggressive(cls) -> 'GammaRange':
        """0.6-0.9: higher thresholds, smaller kept areas."""
        return cls(0.6, 0.9)

    @classmethod
    def fixed(cls, gamma: float) -> 'GammaRange':
        return cls(gamma, gamma)

    @classmethod
    def parse(cls, value: Union['GammaRange', float, str, Sequence[float]]) -> 'GammaRange':
        """Accepts 0.9, "0.3:0.6", [0.3, 0.6] or an existing range."""
        if isinstance(value, GammaRange):
            return value
        if isinstance(value, str):
            parts = [float(p) for p in value.split(':')]
        elif isinstance(value, (int, float)):
            parts = [float(value)]
        else:
            parts = [float(p) for p in value]
        if len(parts) == 1:
            return cls.fixed(parts[0])
        if len(parts) != 2:
            raise ConfigError(f"gamma must be a value or a lo:hi pair, got {value!r}")
        return cls(parts[0], parts[1])

    @property
    def is_fixed(self) -> bool:
        return self.lo == self.hi

    def label(self) -> str:
        return f"{self.lo:g}" if self.is_fixed else f"{self.lo:g}:{self.hi:g}"

    def to_list(self) -> List[float]:
        return [self.lo, self.hi]


@dataclass
class FeatureStack:
    """One sample's activations (n, h, w); a view, never a copy"""
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ShapeError(f"feature stack must be (n, h, w) with every dim >= 1, got {self.values.shape}")

    @classmethod
    def from_batch(cls, batch: np.ndarray, index: int) -> 'FeatureStack':
        return cls(batch[index])

    @property
    def h(self) -> int:
        return self.values.shape[1]

    @property
    def w(self) -> int:
        return self.values.shape[2]


@dataclass
class FocusMask:
    """Binary (h, w) mask plus the quantities that produced it"""
    mask: np.ndarray
    gamma: float
    threshold: float
    ref_channel: int
    peak_pos: Tuple[int, int]
    peak_value: float
    degenerate: bool = False
    inverted: bool = False

    @property
    def retained(self) -> int:
        return int(np.count_nonzero(self.mask))

    def to_dict(self) -> dict:
        return {
            'ref_channel': self.ref_channel,
            'gamma': self.gamma,
            'threshold': self.threshold,
            'peak_value': self.peak_value,
            'peak_row': self.peak_pos[0],
            'peak_col': self.peak_pos[1],
            'degenerate': self.degenerate,
            'inverted': self.inverted,
        }


# =============================================================================
# Mask construction
# =============================================================================

def channel_mean_activations(stack: FeatureStack) -> np.ndarray:
    """w_i = sum of c_i(x, y) / (w * h) for each channel"""
    return stack.values.sum(axis=(1, 2)) / (stack.h * stack.w)


def select_reference_channel(weights: np.ndarray) -> int:
    """Index of the largest weight; lowest index on ties."""
    weights = np.asarray(weights)
    if weights.size == 0:
        raise ValueError("cannot select a reference channel from empty weights")
    return int(np.argmax(weights))


def peak_unit(channel: np.ndarray) -> Tuple[Tuple[int, int], float]:
    """((row, col), value) of the channel maximum; row-major first occurrence on ties."""
    channel = np.asarray(channel)
    if channel.size == 0:
        raise ValueError("cannot locate the peak of an empty channel")
    flat_index = int(np.argmax(channel))
    row, col = np.unravel_index(flat_index, channel.shape)
    return (int(row), int(col)), float(channel[row, col])


def sample_gamma(gamma_range: GammaRange, rng: np.random.Generator) -> float:
    """Uniform draw on [lo, hi]; always consumes exactly one draw."""
    return float(rng.uniform(gamma_range.lo, gamma_range.hi))


def build_focus_mask(stack: FeatureStack, gamma: float) -> FocusMask:
    """
    Mask of the focused area of ``stack`` at ratio ``gamma``

    m(i, j) = 1 iff c_k(i, j) > gamma * peak, where k is the reference channel.
    The comparison runs in float64 against the recorded threshold.
    A stack whose reference peak is not positive gets an all-ones mask.
    """
    k = select_reference_channel(channel_mean_activations(stack))
    reference = stack.values[k].astype(np.float64)
    peak_pos, peak_value = peak_unit(reference)
    threshold = float(gamma) * peak_value

    if peak_value <= 0:
        return FocusMask(
            mask=np.ones((stack.h, stack.w), dtype=np.uint8),
            gamma=gamma, threshold=threshold, ref_channel=k,
            peak_pos=peak_pos, peak_value=peak_value, degenerate=True
        )

    return FocusMask(
        mask=(reference > threshold).astype(np.uint8),
        gamma=gamma, threshold=threshold, ref_channel=k,
        peak_pos=peak_pos, peak_value=peak_value
    )


def invert_mask(mask: FocusMask) -> FocusMask:
    """Flip every bit; the focused area becomes the dropped area."""
    return replace(mask, mask=(1 - mask.mask).astype(np.uint8), inverted=not mask.inverted)


# =============================================================================
# Batch application
# =============================================================================

GammaOverride = Optional[Union[float, Sequence[float]]]


def _gammas_for_batch(n: int, gamma_range: GammaRange, rng: np.random.Generator,
                      gamma: GammaOverride) -> List[float]:
    if gamma is None:
        return [sample_gamma(gamma_range, stream) for stream in sample_streams(rng, n)]
    if np.ndim(gamma) == 0:
        return [float(gamma)] * n
    gammas = [float(g) for g in gamma]
    if len(gammas) != n:
        raise ShapeError(f"got {len(gammas)} gamma values for a batch of {n}")
    return gammas


def apply_focused_dropout(batch: Tensor, mode: DropoutMode, gamma_range: GammaRange,
                          rng: Optional[np.random.Generator], gamma: GammaOverride = None,
                          invert: bool = False, records: Optional[List[FocusMask]] = None) -> Tensor:
    """
    FocusedDropout over an NCHW batch

    Args:
        batch: activations (N, C, H, W), usually post-ReLU
        mode: INFERENCE returns ``batch`` unchanged
        gamma_range: range a fresh γ is drawn from for each sample
        rng: regularizer stream (unused when ``gamma`` is given)
        gamma: force γ, either one value for all samples or one per sample
        invert: drop the focused area instead (Opposite), the exact complement of
            the focused mask for every sample, degenerate ones included
        records: if given, the FocusMask of every sample is appended

    Returns:
        ``batch`` multiplied by each sample's mask broadcast over channels
    """
    if batch.ndim != 4:
        raise ShapeError(f"focused dropout expects a 4-D NCHW batch, got {batch.shape}")
    if mode is DropoutMode.INFERENCE:
        return batch

    n, _, h, w = batch.shape
    gammas = _gammas_for_batch(n, gamma_range, rng, gamma)
    masks = np.empty((n, 1, h, w), dtype=batch.dtype)
    degenerate = 0
    for i in range(n):
        focus = build_focus_mask(FeatureStack.from_batch(batch.data, i), gammas[i])
        if focus.degenerate:
            degenerate += 1
        if invert:
            focus = invert_mask(focus)
        masks[i, 0] = focus.mask
        if records is not None:
            records.append(focus)

    if degenerate:
        logger.debug(f"{degenerate}/{n} samples had a non-positive reference peak")
    return batch * Tensor(masks, dtype=batch.dtype)


def opposite_dropout(batch: Tensor, mode: DropoutMode, gamma_range: GammaRange,
                     rng: Optional[np.random.Generator], gamma: GammaOverride = None,
                     records: Optional[List[FocusMask]] = None) -> Tensor:
    """Same pipeline as FocusedDropout with the mask inverted before broadcasting."""
    return apply_focused_dropout(batch, mode, gamma_range, rng, gamma=gamma, invert=True, records=records)


class FocusedDropout(BaseRegularizer):
    """Keeps the focused area of the reference channel in every channel"""

    def apply(self, batch: Tensor, rng: np.random.Generator) -> Tensor:
        return apply_focused_dropout(batch, DropoutMode.TRAIN, self.spec.gamma, rng, records=self.last_masks)


class OppositeDropout(BaseRegularizer):
    """Drops the focused area and keeps the rest"""

    def apply(self, batch: Tensor, rng: np.random.Generator) -> Tensor:
        return opposite_dropout(batch, DropoutMode.TRAIN, self.spec.gamma, rng, records=self.last_masks)
