"""
Experiment configuration

One YAML file per experiment with sections ``model``, ``data``,
``regularizer``, ``schedule``, ``protocol``, ``seeds``, ``augment`` and an
optional ``expected``. Unknown keys are rejected so typos do not silently
fall back to defaults.
"""

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import yaml

from .. import settings
from ..data import AugmentPolicy, DataSpec
from ..exceptions import ConfigError
from ..models import ModelSpec
from ..regularizers import RegularizerSpec

logger = logging.getLogger(__name__)

# Short names accepted by --param / overrides
OVERRIDE_ALIASES = {
    'participation_rate': 'protocol.participation_rate',
    'rate': 'protocol.participation_rate',
    'mwd': 'protocol.mwd_weight_decay',
    'mwd_weight_decay': 'protocol.mwd_weight_decay',
    'weight_decay': 'protocol.base_weight_decay',
    'gamma': 'regularizer.gamma',
    'epochs': 'schedule.epochs',
    'batch_size': 'schedule.batch_size',
    'lr': 'schedule.base_lr',
}


def _check_keys(section: str, data: Dict[str, Any], allowed: Iterable[str]):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"Unknown {section} keys: {sorted(unknown)}")


@dataclass
class Schedule:
    epochs: int = 10
    batch_size: int = 128
    base_lr: float = 0.1
    momentum: float = 0.9
    lr_milestones: List[int] = field(default_factory=list)
    lr_factor: float = 0.1

    def validate(self):
        if self.epochs < 1:
            raise ConfigError(f"schedule.epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"schedule.batch_size must be >= 1, got {self.batch_size}")
        if self.base_lr <= 0:
            raise ConfigError(f"schedule.base_lr must be > 0, got {self.base_lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"schedule.momentum must be in [0, 1), got {self.momentum}")
        if any(b <= a for a, b in zip(self.lr_milestones, self.lr_milestones[1:])):
            raise ConfigError(f"schedule.lr_milestones must be strictly increasing, got {self.lr_milestones}")


@dataclass
class Protocol:
    """
    Participation-rate batch sampling and magnified weight decay

    Attributes:
        participation_rate: probability a batch is planned active
        base_weight_decay: L2 coefficient on ordinary batches
        mwd_weight_decay: L2 coefficient on active batches
        mwd_enabled: False keeps the base value on active batches too
        randomly_mwd: magnify weight decay on active batches without applying any mask
        exact_fraction: plan exactly round(rate * n) active batches instead of Bernoulli draws
    """
    participation_rate: float = 0.1
    base_weight_decay: float = 5e-4
    mwd_weight_decay: float = 1e-3
    mwd_enabled: bool = True
    randomly_mwd: bool = False
    exact_fraction: bool = False

    def validate(self):
        if not 0.0 <= self.participation_rate <= 1.0:
            raise ConfigError(f"protocol.participation_rate must be in [0, 1], got {self.participation_rate}")
        if self.base_weight_decay < 0:
            raise ConfigError(f"protocol.base_weight_decay must be >= 0, got {self.base_weight_decay}")
        if self.mwd_weight_decay < self.base_weight_decay:
            raise ConfigError(
                f"protocol.mwd_weight_decay ({self.mwd_weight_decay}) must be >= "
                f"base_weight_decay ({self.base_weight_decay})"
            )


@dataclass
class SeedConfig:
    data: int = 0
    init: int = 0
    reg: int = 0


@dataclass
class ExpectedResult:
    """Published accuracy a long run is compared against (percent)"""
    test_acc: float
    tolerance: float = 0.5
    source: str = ''

    def check(self, measured_acc: float) -> bool:
        return abs(measured_acc - self.test_acc) <= self.tolerance


@dataclass
class ExperimentConfig:
    name: str = 'experiment'
    model: ModelSpec = field(default_factory=lambda: ModelSpec(architecture='tiny-cnn', num_classes=3))
    data: DataSpec = field(default_factory=DataSpec)
    regularizer: RegularizerSpec = field(default_factory=RegularizerSpec)
    schedule: Schedule = field(default_factory=Schedule)
    protocol: Protocol = field(default_factory=Protocol)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    augment: AugmentPolicy = field(default_factory=AugmentPolicy.none)
    expected: Optional[ExpectedResult] = None
    output_dir: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        self.schedule.validate()
        self.protocol.validate()
        self.regularizer.validate()
        if self.model.num_classes != self.data.num_classes:
            raise ConfigError(
                f"model.num_classes ({self.model.num_classes}) does not match the data "
                f"({self.data.source}: {self.data.num_classes} classes)"
            )
        # fails early on an insertion point the architecture lacks
        self.model.resolve_insertion_points(self.regularizer.resolved_insertion_points())

    @property
    def magnify_weight_decay(self) -> bool:
        """Active batches get mwd_weight_decay only when something marks them active."""
        return self.protocol.mwd_enabled and (self.protocol.randomly_mwd or not self.regularizer.is_none)

    @property
    def regularizer_fires(self) -> bool:
        return not self.regularizer.is_none and not self.protocol.randomly_mwd

    def output_path(self, root: Optional[Path] = None) -> Path:
        if self.output_dir:
            return Path(self.output_dir)
        return Path(root or settings.OUTPUT_ROOT) / self.name

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'name': self.name,
            'model': self.model.to_dict(),
            'data': self.data.to_dict(),
            'regularizer': self.regularizer.to_dict(),
            'schedule': vars(self.schedule).copy(),
            'protocol': vars(self.protocol).copy(),
            'seeds': vars(self.seeds).copy(),
            'augment': self.augment.to_dict(),
            'output_dir': self.output_dir,
        }
        if self.expected is not None:
            data['expected'] = vars(self.expected).copy()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        data = dict(data or {})
        _check_keys('top-level', data, ['name', 'model', 'data', 'regularizer', 'schedule', 'protocol',
                                        'seeds', 'augment', 'expected', 'output_dir'])
        sections = {}
        for key, klass in (('schedule', Schedule), ('protocol', Protocol), ('seeds', SeedConfig)):
            section = dict(data.get(key) or {})
            _check_keys(key, section, klass.__dataclass_fields__)
            sections[key] = klass(**section)

        expected = None
        if data.get('expected'):
            _check_keys('expected', data['expected'], ExpectedResult.__dataclass_fields__)
            expected = ExpectedResult(**data['expected'])

        try:
            return cls(
                name=str(data.get('name', 'experiment')),
                model=ModelSpec.from_dict(data.get('model')),
                data=DataSpec.from_dict(data.get('data')),
                regularizer=RegularizerSpec.from_dict(data.get('regularizer')),
                augment=AugmentPolicy.from_dict(data['augment']) if 'augment' in data else AugmentPolicy.none(),
                expected=expected,
                output_dir=data.get('output_dir'),
                **sections,
            )
        except TypeError as e:
            raise ConfigError(f"Invalid config: {e}") from e


# =============================================================================
# Loading and overrides
# =============================================================================

def parse_override(text: str):
    """``key=value`` -> (dotted key, parsed value)."""
    if '=' not in text:
        raise ConfigError(f"Override must be key=value, got {text!r}")
    key, raw = (part.strip() for part in text.split('=', 1))
    key = OVERRIDE_ALIASES.get(key, key)
    # gamma ranges stay strings ("0.3:0.6") and are parsed by GammaRange
    value = raw if key == 'regularizer.gamma' else yaml.safe_load(raw)
    return key, value


def apply_overrides(data: Dict[str, Any], overrides: Iterable[Union[str, tuple]]) -> Dict[str, Any]:
    """Copy of ``data`` with each dotted override applied."""
    data = copy.deepcopy(data)
    for override in overrides:
        key, value = parse_override(override) if isinstance(override, str) else override
        key = OVERRIDE_ALIASES.get(key, key)
        target = data
        *parents, leaf = key.split('.')
        for part in parents:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"Override {key}: '{part}' is not a section")
        target[leaf] = value
    return data


def read_config_dict(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    data.setdefault('name', path.stem)
    return data


def load_config(path: Union[str, Path], overrides: Iterable[str] = ()) -> ExperimentConfig:
    """
    Parse an experiment YAML file

    Args:
        path: config file; ``name`` defaults to the file stem
        overrides: ``key=value`` strings, dotted or aliased (participation_rate, gamma, mwd)

    Returns:
        Validated ExperimentConfig
    """
    config = ExperimentConfig.from_dict(apply_overrides(read_config_dict(path), overrides))
    logger.debug(f"Loaded config {config.name} from {path}")
    return config


def save_config(config: ExperimentConfig, path: Union[str, Path]):
    with open(path, 'w') as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False)
