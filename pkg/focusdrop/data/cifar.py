"""
CIFAR-10 / CIFAR-100 binary loader

Record layouts (public binary format):
    CIFAR-10   <1 x label><3072 x pixel>                 3073 bytes
    CIFAR-100  <1 x coarse label><1 x fine label><3072 x pixel>   3074 bytes
Pixels are 1024 red, 1024 green, 1024 blue, each plane row-major 32x32.
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from ..exceptions import DatasetFormatError
from .dataset import DataSplits, Dataset, Normalization

logger = logging.getLogger(__name__)

IMAGE_BYTES = 3 * 32 * 32

LAYOUTS = {
    10: {
        'record_bytes': 1 + IMAGE_BYTES,
        'label_bytes': 1,
        'train': [f"data_batch_{i}.bin" for i in range(1, 6)],
        'test': ['test_batch.bin'],
        'subdir': 'cifar-10-batches-bin',
        'num_classes': 10,
    },
    100: {
        'record_bytes': 2 + IMAGE_BYTES,
        'label_bytes': 2,
        'train': ['train.bin'],
        'test': ['test.bin'],
        'subdir': 'cifar-100-binary',
        'num_classes': 100,
    },
}

EXPECTED_COUNTS = {'train': 50000, 'test': 10000}


def read_cifar_records(path: Union[str, Path], variant: int = 10,
                       label_mode: str = 'fine') -> Tuple[np.ndarray, np.ndarray]:
    """
    Decode one binary batch file

    Args:
        path: .bin file
        variant: 10 or 100
        label_mode: for CIFAR-100, 'fine' (100 classes) or 'coarse' (20)

    Returns:
        (uint8 images (N, 3, 32, 32), int64 labels (N,))

    Raises:
        DatasetFormatError: size not a whole number of records
    """
    layout = LAYOUTS[variant]
    record = layout['record_bytes']
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % record:
        whole = raw.size // record
        raise DatasetFormatError(
            f"{path}: {raw.size} bytes is not a whole number of {record}-byte CIFAR-{variant} records; "
            f"truncated record starts at byte offset {whole * record}"
        )
    records = raw.reshape(-1, record)
    if variant == 100:
        label_column = 1 if label_mode == 'fine' else 0
    else:
        label_column = 0
    labels = records[:, label_column].astype(np.int64)
    images = records[:, layout['label_bytes']:].reshape(-1, 3, 32, 32)
    return images, labels


def _locate(path: Path, variant: int) -> Path:
    subdir = path / LAYOUTS[variant]['subdir']
    return subdir if subdir.is_dir() else path


def _load_split(directory: Path, variant: int, split: str, label_mode: str) -> Tuple[np.ndarray, np.ndarray]:
    images: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    for name in LAYOUTS[variant][split]:
        file_path = directory / name
        if not file_path.exists():
            raise FileNotFoundError(f"CIFAR-{variant} file not found: {file_path}")
        x, y = read_cifar_records(file_path, variant, label_mode)
        images.append(x)
        labels.append(y)
    return np.concatenate(images), np.concatenate(labels)


def load_cifar(path: Union[str, Path], variant: int = 10, strict: bool = True, label_mode: str = 'fine',
               normalization: Normalization = None) -> DataSplits:
    """
    Load both CIFAR splits, normalised with training statistics

    Args:
        path: directory holding the .bin files (or their standard sub-directory)
        variant: 10 or 100
        strict: require exactly 50,000 train and 10,000 test records
        label_mode: CIFAR-100 label granularity
        normalization: use these constants instead of computing them (evaluation)
    """
    if variant not in LAYOUTS:
        raise ValueError(f"CIFAR variant must be 10 or 100, got {variant}")
    if label_mode not in ('fine', 'coarse'):
        raise ValueError(f"label_mode must be 'fine' or 'coarse', got {label_mode}")
    directory = _locate(Path(path), variant)
    num_classes = 20 if (variant == 100 and label_mode == 'coarse') else LAYOUTS[variant]['num_classes']
    source = f"cifar{variant}"

    datasets = {}
    for split in ('train', 'test'):
        images, labels = _load_split(directory, variant, split, label_mode)
        if strict and len(labels) != EXPECTED_COUNTS[split]:
            raise DatasetFormatError(
                f"{source}/{split}: expected {EXPECTED_COUNTS[split]} records, found {len(labels)}"
            )
        if not strict and len(labels) != EXPECTED_COUNTS[split]:
            logger.warning(f"⚠️ {source}/{split}: {len(labels):,} records, expected {EXPECTED_COUNTS[split]:,}")
        datasets[split] = Dataset(
            images=images.astype(np.float32) / 255.0, labels=labels, num_classes=num_classes,
            split=split, source=source
        )
        logger.info(f"Loaded {source}/{split}: {len(labels):,} records from {directory}")

    return DataSplits.from_raw(datasets['train'], datasets['test'], normalization)
