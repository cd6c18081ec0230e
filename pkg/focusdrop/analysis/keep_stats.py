"""
Keeping-ratio statistics

For a binary mask, dropped_fraction = zeros / units and retained_fraction is
its complement. "Keeping ratio" is ambiguous between the two, so both are
logged under these names.
"""

from dataclasses import dataclass, field
from typing import Iterable, List, Tuple, Union

import numpy as np

from ..regularizers import FocusMask

MaskLike = Union[FocusMask, np.ndarray]


def keeping_ratio(mask: MaskLike) -> Tuple[float, float]:
    """(dropped_fraction, retained_fraction) of one mask; they sum to 1."""
    bits = mask.mask if isinstance(mask, FocusMask) else np.asarray(mask)
    if bits.size == 0:
        raise ValueError("keeping_ratio of an empty mask")
    dropped = float(np.count_nonzero(bits == 0)) / bits.size
    return dropped, 1.0 - dropped


@dataclass
class KeepStats:
    """Per-sample dropped fractions collected over an epoch"""
    dropped: List[float] = field(default_factory=list)

    def add(self, mask: MaskLike):
        self.dropped.append(keeping_ratio(mask)[0])

    def extend(self, masks: Iterable[MaskLike]):
        for mask in masks:
            self.add(mask)

    def reset(self):
        self.dropped = []

    def __len__(self) -> int:
        return len(self.dropped)

    @property
    def mean_dropped(self) -> float:
        """Epoch mean; 0.0 when no mask was recorded."""
        return float(np.mean(self.dropped)) if self.dropped else 0.0

    @property
    def mean_retained(self) -> float:
        return 1.0 - self.mean_dropped
