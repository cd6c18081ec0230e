"""
Data source selection

``DataSpec`` is the ``data:`` section of an experiment config; ``load_splits``
turns it into normalised train/test splits.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

from .. import settings
from ..exceptions import ConfigError
from .cifar import load_cifar
from .dataset import DataSplits, Normalization
from .synthetic import make_synthetic_splits

SOURCES = ('synthetic', 'cifar10', 'cifar100')


@dataclass
class DataSpec:
    source: str = 'synthetic'
    path: Optional[str] = None
    classes: int = 3
    n_per_class: int = 300
    test_per_class: Optional[int] = None
    image_size: int = 16
    seed: int = 0
    strict: bool = True
    label_mode: str = 'fine'

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"Unknown data source '{self.source}'. Known: {', '.join(SOURCES)}")

    @property
    def num_classes(self) -> int:
        if self.source == 'cifar10':
            return 10
        if self.source == 'cifar100':
            return 20 if self.label_mode == 'coarse' else 100
        return self.classes

    @property
    def resolved_path(self) -> Path:
        return Path(self.path) if self.path else settings.DATA_DIR

    def to_dict(self) -> Dict[str, Any]:
        return {
            'source': self.source, 'path': self.path, 'classes': self.classes,
            'n_per_class': self.n_per_class, 'test_per_class': self.test_per_class,
            'image_size': self.image_size, 'seed': self.seed, 'strict': self.strict,
            'label_mode': self.label_mode,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DataSpec':
        data = dict(data or {})
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ConfigError(f"Unknown data keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def parse(cls, value: str) -> 'DataSpec':
        """CLI form: ``synthetic``, ``synthetic:classes=3,image_size=16`` or ``cifar10:/path/to/bin``."""
        source, _, rest = value.partition(':')
        if source in ('cifar10', 'cifar100'):
            return cls(source=source, path=rest or None)
        if source != 'synthetic':
            raise ConfigError(f"Unknown dataset '{value}'. Use synthetic[:k=v,...], cifar10[:path] or cifar100[:path]")
        options: Dict[str, Any] = {}
        for item in filter(None, rest.split(',')):
            key, _, raw = item.partition('=')
            options[key.strip()] = int(raw)
        return cls.from_dict({'source': 'synthetic', **options})


def load_splits(spec: DataSpec, normalization: Optional[Normalization] = None) -> DataSplits:
    """Load or synthesise both splits; ``normalization`` overrides the train statistics."""
    if spec.source == 'synthetic':
        return make_synthetic_splits(spec.classes, spec.n_per_class, spec.image_size, spec.seed,
                                     spec.test_per_class, normalization)
    variant = 10 if spec.source == 'cifar10' else 100
    return load_cifar(spec.resolved_path, variant, strict=spec.strict, label_mode=spec.label_mode,
                      normalization=normalization)
