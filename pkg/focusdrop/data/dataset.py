"""
Dataset containers

Images are stored NCHW as float32. Raw pixels are bounds-checked to [0, 1],
then normalised per channel with the training split's mean/std; the
constants travel with the dataset (and into checkpoints and the manifest).
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from ..exceptions import DatasetFormatError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class Normalization:
    """Per-channel mean/std computed once on the training split"""
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_images(cls, images: np.ndarray) -> 'Normalization':
        mean = images.mean(axis=(0, 2, 3), dtype=np.float64)
        std = images.std(axis=(0, 2, 3), dtype=np.float64)
        # constant channels would divide by zero
        std = np.where(std > 1e-8, std, 1.0)
        return cls(mean=mean, std=std)

    def apply(self, images: np.ndarray) -> np.ndarray:
        shape = (1, -1, 1, 1)
        return ((images - self.mean.reshape(shape)) / self.std.reshape(shape)).astype(np.float32)

    def to_dict(self) -> Dict[str, list]:
        return {'mean': [float(v) for v in self.mean], 'std': [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Normalization':
        return cls(mean=np.asarray(data['mean'], dtype=np.float64), std=np.asarray(data['std'], dtype=np.float64))


def check_pixel_bounds(images: np.ndarray, source: str):
    """Raw pixels must lie in [0, 1] before normalisation."""
    low, high = float(images.min(initial=0.0)), float(images.max(initial=0.0))
    if low < 0.0 or high > 1.0 or not np.all(np.isfinite(images)):
        raise DatasetFormatError(f"{source}: pixel values outside [0, 1] (min {low}, max {high})")


@dataclass
class Dataset:
    """
    One split of images with integer labels

    Attributes:
        images: (N, C, H, W) float32, normalised when ``normalization`` is set
        labels: (N,) int64 class indices < num_classes
        num_classes: label range
        split: 'train' or 'test'
        source: where the data came from (synthetic, cifar10, cifar100)
        normalization: constants applied to ``images``, None for raw [0, 1]
        seed: generator seed for synthetic data
    """
    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = 'train'
    source: str = 'synthetic'
    normalization: Optional[Normalization] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ShapeError(f"images must be (N, C, H, W), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ShapeError(f"labels {self.labels.shape} do not match images {self.images.shape}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetFormatError(
                f"{self.source}/{self.split}: labels must be in [0, {self.num_classes}), "
                f"got range [{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def normalized(self, normalization: Normalization) -> 'Dataset':
        """Normalised copy; the dataset must still hold raw pixels."""
        if self.normalization is not None:
            raise ValueError(f"{self.source}/{self.split} is already normalised")
        check_pixel_bounds(self.images, f"{self.source}/{self.split}")
        return Dataset(
            images=normalization.apply(self.images), labels=self.labels, num_classes=self.num_classes,
            split=self.split, source=self.source, normalization=normalization, seed=self.seed
        )


@dataclass
class DataSplits:
    """Train/test pair sharing the training split's normalisation"""
    train: Dataset
    test: Dataset

    @classmethod
    def from_raw(cls, train: Dataset, test: Dataset, normalization: Optional[Normalization] = None) -> 'DataSplits':
        """Bounds-check raw splits and normalise both with train statistics (or ``normalization``)."""
        check_pixel_bounds(train.images, f"{train.source}/{train.split}")
        normalization = normalization or Normalization.from_images(train.images)
        logger.debug(f"{train.source}: normalisation mean={normalization.mean}, std={normalization.std}")
        return cls(train=train.normalized(normalization), test=test.normalized(normalization))

    @property
    def normalization(self) -> Normalization:
        return self.train.normalization

    @property
    def num_classes(self) -> int:
        return self.train.num_classes

    def manifest(self) -> Dict[str, str]:
        norm = self.normalization
        c, h, w = self.train.image_shape
        return {
            'source': self.train.source,
            'num_classes': str(self.num_classes),
            'train_count': str(len(self.train)),
            'test_count': str(len(self.test)),
            'image_shape': f"{c}x{h}x{w}",
            'mean': ','.join(f"{v:.17g}" for v in norm.mean),
            'std': ','.join(f"{v:.17g}" for v in norm.std),
            'seed': '' if self.train.seed is None else str(self.train.seed),
        }


def write_manifest(entries: Dict[str, str], path: Union[str, Path]):
    """Plain-text ``key = value`` file, one entry per line."""
    lines = [f"{key} = {value}" for key, value in entries.items()]
    Path(path).write_text('\n'.join(lines) + '\n')


def read_manifest(path: Union[str, Path]) -> Dict[str, str]:
    entries = {}
    for number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise DatasetFormatError(f"{path}:{number}: expected 'key = value', got {line!r}")
        key, value = line.split('=', 1)
        entries[key.strip()] = value.strip()
    return entries


def normalization_from_manifest(entries: Dict[str, str]) -> Normalization:
    return Normalization(
        mean=np.array([float(v) for v in entries['mean'].split(',')]),
        std=np.array([float(v) for v in entries['std'].split(',')]),
    )
