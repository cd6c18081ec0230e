"""
Autograd - dense NCHW tensors with reverse-mode differentiation

Provides:
1. Tensor / Tape with exact reverse-order backward
2. Layer kernels (conv2d, maxpool2d, batch norm, GAP, linear, cross-entropy)
3. FNT1 tensor snapshots
4. Finite-difference gradient checks
"""

from .tensor import Tensor, Tape, Function, as_tensor, ones_like, precision, no_grad, get_default_dtype
from .ops import (
    add, mul, neg, matmul, relu, sum, mean, reshape,
    conv2d, maxpool2d, global_avg_pool, batch_norm2d, linear, softmax_cross_entropy,
)
from .snapshot import save_tensor, load_tensor, write_snapshots, read_snapshots

__all__ = [
    'Tensor', 'Tape', 'Function', 'as_tensor', 'ones_like', 'precision', 'no_grad', 'get_default_dtype',
    'add', 'mul', 'neg', 'matmul', 'relu', 'sum', 'mean', 'reshape',
    'conv2d', 'maxpool2d', 'global_avg_pool', 'batch_norm2d', 'linear', 'softmax_cross_entropy',
    'save_tensor', 'load_tensor', 'write_snapshots', 'read_snapshots',
]
