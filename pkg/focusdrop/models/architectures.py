"""
Architectures

Every network is a StagedNetwork: a stem, a list of named stages
(``stage1`` .. ``stageN``) whose outputs are the insertion points for
regularizers, then a global-average-pool + linear classifier head.

    tiny-cnn   three conv stages, widths 8/16/32, for second-scale tests
    resnet     CIFAR ResNet of depth 6n+2 (20, 56, 110), widths 16/32/64
    vgg        two 3x3 conv layers per stage, widths 32/64/128
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..autograd import Tensor
from ..exceptions import ConfigError, ModelSpecError
from ..regularizers import (
    FIRST_TWO, PENULTIMATE, BaseRegularizer, DropoutMode, RegularizerSpec, build_regularizer,
)
from .layers import BatchNorm2d, Conv2d, GlobalAvgPool2d, Linear, MaxPool2d, Module, ReLU, Sequential

logger = logging.getLogger(__name__)

DEFAULT_WIDTHS = {
    'tiny-cnn': [8, 16, 32],
    'resnet': [16, 32, 64],
    'vgg': [32, 64, 128],
}


@dataclass
class ModelSpec:
    """Architecture name plus its size parameters"""
    architecture: str = 'resnet'
    num_classes: int = 10
    in_channels: int = 3
    widths: List[int] = field(default_factory=list)
    depth: int = 20

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ModelSpecError(
                f"Unknown architecture '{self.architecture}'. Known: {', '.join(sorted(ARCHITECTURES))}"
            )
        if not self.widths:
            self.widths = list(DEFAULT_WIDTHS[self.architecture])
        if len(self.widths) < 2:
            raise ModelSpecError(f"need at least two stages, got widths {self.widths}")
        if self.num_classes < 2:
            raise ModelSpecError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.architecture == 'resnet' and (self.depth - 2) % 6 != 0:
            raise ModelSpecError(f"resnet depth must be 6n+2 (20, 56, 110, ...), got {self.depth}")

    @property
    def stage_names(self) -> List[str]:
        return [f"stage{i + 1}" for i in range(len(self.widths))]

    def resolve_insertion_points(self, points: List[str]) -> List[str]:
        """Map aliases (penultimate, first_two) to stage names; every name must exist."""
        names = self.stage_names
        resolved: List[str] = []
        for point in points:
            if point == PENULTIMATE:
                candidates = [names[-2]]
            elif point == FIRST_TWO:
                candidates = names[:2]
            elif point in names:
                candidates = [point]
            else:
                raise ModelSpecError(
                    f"Insertion point '{point}' does not name a stage of {self.architecture}. "
                    f"Known: {', '.join(names + [PENULTIMATE, FIRST_TWO])}"
                )
            resolved.extend(c for c in candidates if c not in resolved)
        return resolved

    def to_dict(self) -> Dict[str, Any]:
        return {
            'architecture': self.architecture,
            'num_classes': self.num_classes,
            'in_channels': self.in_channels,
            'widths': list(self.widths),
            'depth': self.depth,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModelSpec':
        data = dict(data or {})
        unknown = set(data) - {'architecture', 'num_classes', 'in_channels', 'widths', 'depth'}
        if unknown:
            raise ConfigError(f"Unknown model keys: {sorted(unknown)}")
        return cls(**data)


# =============================================================================
# Network
# =============================================================================

class StagedNetwork(Module):
    """stem -> stage1 .. stageN -> GAP -> linear"""

    def __init__(self, spec: ModelSpec, stem: Module, stages: List[Module], classifier: Linear):
        super().__init__()
        self.spec = spec
        self.stem = stem
        self.stages = stages
        self.pool = GlobalAvgPool2d()
        self.classifier = classifier
        # stage name -> regularizer applied to that stage's output
        self.regularizers: Dict[str, BaseRegularizer] = {}

    @property
    def stage_names(self) -> List[str]:
        return self.spec.stage_names

    @property
    def penultimate_stage(self) -> str:
        return self.stage_names[-2]

    def named_parameters(self, prefix: str = ''):
        yield from self.stem.named_parameters(f"{prefix}stem.")
        for name, stage in zip(self.stage_names, self.stages):
            yield from stage.named_parameters(f"{prefix}{name}.")
        yield from self.classifier.named_parameters(f"{prefix}classifier.")

    def named_buffers(self, prefix: str = ''):
        yield from self.stem.named_buffers(f"{prefix}stem.")
        for name, stage in zip(self.stage_names, self.stages):
            yield from stage.named_buffers(f"{prefix}{name}.")

    def forward_features(self, x: Tensor, reg_active: bool = False,
                         reg_rng: Optional[np.random.Generator] = None) -> Tensor:
        """Output of the last stage (the last conv feature map)."""
        mode = DropoutMode.TRAIN if (self.training and reg_active) else DropoutMode.INFERENCE
        out = self.stem(x)
        for name, stage in zip(self.stage_names, self.stages):
            out = stage(out)
            regularizer = self.regularizers.get(name)
            if regularizer is not None:
                out = regularizer(out, mode, reg_rng)
        return out

    def forward(self, x: Tensor, reg_active: bool = False,
                reg_rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Logits for an NCHW batch

        Args:
            x: input images (N, C, H, W)
            reg_active: route stage outputs through the inserted regularizers
                (only honoured in training mode)
            reg_rng: regularizer stream; only consumed when a regularizer fires

        Returns:
            (N, num_classes) logits
        """
        return self.classifier(self.pool(self.forward_features(x, reg_active, reg_rng)))

    def stage_outputs(self, x: Tensor) -> Dict[str, Tensor]:
        """Every stage output without regularization."""
        outputs = {}
        out = self.stem(x)
        for name, stage in zip(self.stage_names, self.stages):
            out = stage(out)
            outputs[name] = out
        return outputs

    def __repr__(self) -> str:
        regs = ', '.join(f"{k}: {v!r}" for k, v in self.regularizers.items()) or 'none'
        return f"StagedNetwork({self.spec.architecture}, widths={self.spec.widths}, regularizers={regs})"


# =============================================================================
# Builders
# =============================================================================

def conv_bn_relu(in_channels: int, out_channels: int, rng: np.random.Generator, stride: int = 1) -> List[Module]:
    return [Conv2d(in_channels, out_channels, 3, rng, stride=stride, padding=1), BatchNorm2d(out_channels), ReLU()]


class BasicBlock(Module):
    """Two 3x3 convs with an identity or 1x1 projection shortcut"""

    def __init__(self, in_channels: int, out_channels: int, stride: int, rng: np.random.Generator):
        super().__init__()
        self.conv1 = Conv2d(in_channels, out_channels, 3, rng, stride=stride, padding=1)
        self.bn1 = BatchNorm2d(out_channels)
        self.conv2 = Conv2d(out_channels, out_channels, 3, rng, stride=1, padding=1)
        self.bn2 = BatchNorm2d(out_channels)
        self.shortcut = None
        if stride != 1 or in_channels != out_channels:
            self.shortcut = Sequential(Conv2d(in_channels, out_channels, 1, rng, stride=stride),
                                       BatchNorm2d(out_channels))

    def forward(self, x: Tensor) -> Tensor:
        y = self.bn1(self.conv1(x)).relu()
        y = self.bn2(self.conv2(y))
        identity = x if self.shortcut is None else self.shortcut(x)
        return (identity + y).relu()


def build_tiny_cnn(spec: ModelSpec, rng: np.random.Generator) -> StagedNetwork:
    w = spec.widths
    stages = [Sequential(*conv_bn_relu(spec.in_channels, w[0], rng), MaxPool2d(2))]
    for i in range(1, len(w)):
        pool = [MaxPool2d(2)] if i == len(w) - 1 else []
        stages.append(Sequential(*pool, *conv_bn_relu(w[i - 1], w[i], rng)))
    return StagedNetwork(spec, Sequential(), stages, Linear(w[-1], spec.num_classes, rng))


def build_resnet(spec: ModelSpec, rng: np.random.Generator) -> StagedNetwork:
    blocks_per_stage = (spec.depth - 2) // 6
    w = spec.widths
    stem = Sequential(*conv_bn_relu(spec.in_channels, w[0], rng))
    stages = []
    in_channels = w[0]
    for i, width in enumerate(w):
        stride = 1 if i == 0 else 2
        blocks = [BasicBlock(in_channels, width, stride, rng)]
        blocks += [BasicBlock(width, width, 1, rng) for _ in range(blocks_per_stage - 1)]
        stages.append(Sequential(*blocks))
        in_channels = width
    return StagedNetwork(spec, stem, stages, Linear(w[-1], spec.num_classes, rng))


def build_vgg(spec: ModelSpec, rng: np.random.Generator) -> StagedNetwork:
    w = spec.widths
    stages = []
    in_channels = spec.in_channels
    for i, width in enumerate(w):
        pool = [MaxPool2d(2)] if i > 0 else []
        stages.append(Sequential(*pool, *conv_bn_relu(in_channels, width, rng), *conv_bn_relu(width, width, rng)))
        in_channels = width
    return StagedNetwork(spec, Sequential(), stages, Linear(w[-1], spec.num_classes, rng))


ARCHITECTURES: Dict[str, Callable[[ModelSpec, np.random.Generator], StagedNetwork]] = {
    'tiny-cnn': build_tiny_cnn,
    'resnet': build_resnet,
    'vgg': build_vgg,
}


def build_model(spec: ModelSpec, rng: np.random.Generator) -> StagedNetwork:
    """
    Build and initialise the network described by ``spec``

    Args:
        spec: architecture and sizes
        rng: init stream; the only randomness used

    Returns:
        StagedNetwork in training mode with no regularizers
    """
    model = ARCHITECTURES[spec.architecture](spec, rng)
    name = spec.architecture if spec.architecture != 'resnet' else f"resnet-{spec.depth}"
    logger.info(f"Built {name} widths={spec.widths}: {model.parameter_count():,} parameters")
    return model


def insert_regularizer(model: StagedNetwork, reg: RegularizerSpec) -> StagedNetwork:
    """
    Attach ``reg`` to the stage outputs it names (replacing any previous regularizer)

    Raises:
        ModelSpecError: an insertion point does not resolve to a stage
    """
    model.regularizers = {}
    if reg.is_none:
        return model
    for stage in model.spec.resolve_insertion_points(reg.resolved_insertion_points()):
        model.regularizers[stage] = build_regularizer(reg)
    logger.info(f"Inserted {reg.describe()} -> {', '.join(model.regularizers)}")
    return model
