"""
Data pipeline - ingestion, synthesis, augmentation and batching
"""

from .augment import AugmentPolicy, augment, flip_horizontal, sample_crop_offsets
from .batching import iterate_batches, num_batches
from .cifar import load_cifar, read_cifar_records
from .dataset import (
    DataSplits, Dataset, Normalization, check_pixel_bounds, normalization_from_manifest, read_manifest,
    write_manifest,
)
from .sources import DataSpec, load_splits
from .synthetic import PATTERN_NAMES, make_synthetic, make_synthetic_splits

__all__ = [
    'AugmentPolicy', 'augment', 'flip_horizontal', 'sample_crop_offsets',
    'iterate_batches', 'num_batches',
    'load_cifar', 'read_cifar_records',
    'Dataset', 'DataSplits', 'Normalization', 'check_pixel_bounds',
    'write_manifest', 'read_manifest', 'normalization_from_manifest',
    'DataSpec', 'load_splits',
    'PATTERN_NAMES', 'make_synthetic', 'make_synthetic_splits',
]
