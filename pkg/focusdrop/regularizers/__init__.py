"""
Regularizers - feature-map dropout variants

Provides:
1. FocusedDropout and its Opposite ablation
2. Random baselines: standard dropout, SpatialDropout, DropBlock
3. RegularizerSpec and the build_regularizer factory
"""

from typing import Optional

from .base_regularizer import BaseRegularizer, DropoutMode
from .dropblock import DropBlock, dropblock
from .focused import (
    FeatureStack, FocusMask, FocusedDropout, GammaRange, OppositeDropout,
    apply_focused_dropout, build_focus_mask, channel_mean_activations, invert_mask,
    opposite_dropout, peak_unit, sample_gamma, select_reference_channel,
)
from .spec import FIRST_TWO, PENULTIMATE, RegularizerKind, RegularizerSpec
from .standard import SpatialDropout, StandardDropout, spatial_dropout, standard_dropout

REGULARIZERS = {
    RegularizerKind.STANDARD: StandardDropout,
    RegularizerKind.SPATIAL: SpatialDropout,
    RegularizerKind.DROPBLOCK: DropBlock,
    RegularizerKind.FOCUSED: FocusedDropout,
    RegularizerKind.OPPOSITE: OppositeDropout,
}


def build_regularizer(spec: RegularizerSpec) -> Optional[BaseRegularizer]:
    """Regularizer instance for ``spec``; None for kind NONE."""
    if spec.is_none:
        return None
    return REGULARIZERS[spec.kind](spec)


__all__ = [
    'BaseRegularizer', 'DropoutMode', 'RegularizerKind', 'RegularizerSpec', 'PENULTIMATE', 'FIRST_TWO',
    'build_regularizer', 'REGULARIZERS',
    'FeatureStack', 'FocusMask', 'GammaRange', 'FocusedDropout', 'OppositeDropout',
    'channel_mean_activations', 'select_reference_channel', 'peak_unit', 'sample_gamma',
    'build_focus_mask', 'apply_focused_dropout', 'invert_mask', 'opposite_dropout',
    'StandardDropout', 'SpatialDropout', 'DropBlock', 'standard_dropout', 'spatial_dropout', 'dropblock',
]
