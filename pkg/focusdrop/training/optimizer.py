"""
SGD with momentum and per-step weight decay
"""

import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..exceptions import NonFiniteError, ShapeError
from ..models import Parameter

logger = logging.getLogger(__name__)


def sgd_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], velocities: Sequence[np.ndarray],
             lr: float, momentum: float, weight_decay: float, names: Sequence[str] = ()):
    """
    In-place update of every (param, grad, velocity) triple:

        v <- momentum * v + grad + weight_decay * param
        param <- param - lr * v

    Raises:
        NonFiniteError: a gradient holds NaN/Inf; nothing is updated
    """
    names = list(names) or [f"param[{i}]" for i in range(len(params))]
    for name, p, g in zip(names, params, grads):
        if g.shape != p.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} vs parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient in {name}; aborting step")

    for p, g, v in zip(params, grads, velocities):
        v *= momentum
        v += g
        if weight_decay:
            v += weight_decay * p
        p -= lr * v


class SGD:
    """Momentum SGD over named parameters; the weight decay is given per step"""

    def __init__(self, named_params: List[Tuple[str, Parameter]], momentum: float = 0.9):
        self.named_params = named_params
        self.momentum = momentum
        self.velocities: Dict[str, np.ndarray] = {name: np.zeros_like(p.data) for name, p in named_params}

    def zero_grad(self):
        for _, p in self.named_params:
            p.zero_grad()

    def step(self, lr: float, weight_decay: float):
        names, params, grads, velocities = [], [], [], []
        for name, p in self.named_params:
            if p.grad is None:
                continue
            names.append(name)
            params.append(p.data)
            grads.append(p.grad)
            velocities.append(self.velocities[name])
        # scalars cast so float32 params stay float32
        dtype = params[0].dtype if params else np.float32
        sgd_step(params, grads, velocities, dtype.type(lr), dtype.type(self.momentum), dtype.type(weight_decay),
                 names=names)
