"""
Finite-difference gradient checking

Central differences on float64 arrays, compared against the analytic
gradients produced by the tape.
"""

from typing import Callable

import numpy as np


def numerical_gradient(fn: Callable[[], float], array: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """
    Central-difference gradient of the scalar ``fn()`` with respect to ``array``.

    ``array`` is perturbed in place and restored after each coordinate, so
    ``fn`` must read it (typically it is the ``.data`` of a leaf tensor).
    """
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = float(fn())
        flat[i] = original - eps
        minus = float(fn())
        flat[i] = original
        out[i] = (plus - minus) / (2 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> float:
    """Largest elementwise |a - n| / max(|a|, |n|, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0
