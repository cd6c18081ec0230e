"""
Regularizer specification

Tagged choice of regularizer plus its parameters and the stage outputs it is
applied to. Part of the experiment config (``regularizer:`` section).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List

from ..exceptions import ConfigError
from .focused import GammaRange


class RegularizerKind(Enum):
    NONE = "none"
    STANDARD = "standard"
    SPATIAL = "spatial"
    DROPBLOCK = "dropblock"
    FOCUSED = "focused"
    OPPOSITE = "opposite"

    @classmethod
    def parse(cls, value) -> 'RegularizerKind':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            known = ', '.join(k.value for k in cls)
            raise ConfigError(f"Unknown regularizer kind '{value}'. Known: {known}")


# Insertion point aliases resolved against the model's stage list
PENULTIMATE = 'penultimate'
FIRST_TWO = 'first_two'


@dataclass
class RegularizerSpec:
    """
    Which regularizer to insert and where

    Attributes:
        kind: regularizer family
        p: drop probability (standard / spatial)
        block_size, keep_prob: DropBlock parameters
        gamma: γ range (focused / opposite)
        insertion_points: stage names or aliases; empty selects the default
            (first two stages for DropBlock, penultimate stage otherwise)
    """
    kind: RegularizerKind = RegularizerKind.NONE
    p: float = 0.1
    block_size: int = 3
    keep_prob: float = 0.9
    gamma: GammaRange = field(default_factory=GammaRange.moderate)
    insertion_points: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.kind = RegularizerKind.parse(self.kind)
        self.gamma = GammaRange.parse(self.gamma)
        self.validate()

    def validate(self):
        if not 0.0 <= self.p < 1.0:
            raise ConfigError(f"regularizer.p must be in [0, 1), got {self.p}")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ConfigError(f"regularizer.keep_prob must be in (0, 1], got {self.keep_prob}")
        if int(self.block_size) != self.block_size or self.block_size < 1:
            raise ConfigError(f"regularizer.block_size must be a positive integer, got {self.block_size}")

    @property
    def is_none(self) -> bool:
        return self.kind is RegularizerKind.NONE

    @property
    def is_focused_family(self) -> bool:
        return self.kind in (RegularizerKind.FOCUSED, RegularizerKind.OPPOSITE)

    def resolved_insertion_points(self) -> List[str]:
        if self.insertion_points:
            return list(self.insertion_points)
        if self.kind is RegularizerKind.DROPBLOCK:
            return [FIRST_TWO]
        return [PENULTIMATE]

    def describe(self) -> str:
        if self.kind is RegularizerKind.NONE:
            return "none"
        if self.kind in (RegularizerKind.STANDARD, RegularizerKind.SPATIAL):
            params = f"p={self.p:g}"
        elif self.kind is RegularizerKind.DROPBLOCK:
            params = f"block_size={self.block_size}, keep_prob={self.keep_prob:g}"
        else:
            params = f"gamma={self.gamma.label()}"
        return f"{self.kind.value}({params}) @ {','.join(self.resolved_insertion_points())}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'p': self.p,
            'block_size': self.block_size,
            'keep_prob': self.keep_prob,
            'gamma': self.gamma.to_list(),
            'insertion_points': list(self.insertion_points),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RegularizerSpec':
        data = dict(data or {})
        known = {'kind', 'p', 'block_size', 'keep_prob', 'gamma', 'insertion_points', 'insertion_point'}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown regularizer keys: {sorted(unknown)}")
        points = data.pop('insertion_points', None)
        single = data.pop('insertion_point', None)
        if points is None:
            points = [single] if single else []
        elif isinstance(points, str):
            points = [points]
        return cls(insertion_points=[str(p) for p in points], **data)
