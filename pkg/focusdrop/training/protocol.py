"""
Training protocol: which batches are regularized and the step LR schedule

A batch is "active" with probability participation_rate. Active batches
apply the regularizer and, with magnified weight decay (MWD), train with
the larger L2 coefficient.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np


@dataclass
class BatchPlan:
    """Per-batch active flag and the weight decay in force for that step"""
    active: np.ndarray
    weight_decay: np.ndarray

    def __len__(self) -> int:
        return int(self.active.size)

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.active))

    @property
    def active_fraction(self) -> float:
        return self.active_count / len(self) if len(self) else 0.0


def plan_batches(num_batches: int, rate: float, rng: np.random.Generator, base_weight_decay: float = 5e-4,
                 mwd_weight_decay: float = 1e-3, exact: bool = False, magnify: bool = True) -> BatchPlan:
    """
    Choose the active batches of one epoch

    Args:
        num_batches: batches in the epoch
        rate: participation rate in [0, 1]
        rng: plan stream (always consumed, whatever the rate)
        base_weight_decay: L2 on inactive batches
        mwd_weight_decay: L2 on active batches when ``magnify``
        exact: exactly round(rate * num_batches) active batches at random positions
        magnify: False keeps base_weight_decay everywhere

    Returns:
        BatchPlan with one entry per batch
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"participation rate must be in [0, 1], got {rate}")
    if exact:
        active = np.zeros(num_batches, dtype=bool)
        active[rng.permutation(num_batches)[:int(round(rate * num_batches))]] = True
    else:
        active = rng.random(num_batches) < rate
    active_wd = mwd_weight_decay if magnify else base_weight_decay
    weight_decay = np.where(active, active_wd, base_weight_decay)
    return BatchPlan(active=active, weight_decay=weight_decay)


def step_lr(epoch: int, base_lr: float, milestones: Sequence[int], factor: float = 0.1) -> float:
    """LR for 0-based ``epoch``: base_lr * factor ** (milestones already reached)."""
    reached = sum(1 for m in milestones if epoch >= m)
    return base_lr * factor ** reached


def lr_sequence(epochs: int, base_lr: float, milestones: Sequence[int], factor: float = 0.1) -> List[float]:
    return [step_lr(e, base_lr, milestones, factor) for e in range(epochs)]
