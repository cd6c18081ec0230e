"""
Models - small CNNs with named stage outputs as regularizer insertion points
"""

from .architectures import (
    ARCHITECTURES, BasicBlock, ModelSpec, StagedNetwork, build_model, insert_regularizer,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    BatchNorm2d, Conv2d, GlobalAvgPool2d, Linear, MaxPool2d, Module, Parameter, ReLU, Sequential,
)

__all__ = [
    'ARCHITECTURES', 'BasicBlock', 'ModelSpec', 'StagedNetwork', 'build_model', 'insert_regularizer',
    'save_checkpoint', 'load_checkpoint',
    'Module', 'Parameter', 'Conv2d', 'BatchNorm2d', 'Linear', 'ReLU', 'MaxPool2d', 'GlobalAvgPool2d',
    'Sequential',
]
