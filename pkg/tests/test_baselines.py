"""
Random dropout baselines, the regularizer spec and the factory
"""

import numpy as np
import pytest

from focusdrop.autograd import Tensor
from focusdrop.exceptions import ConfigError, ShapeError
from focusdrop.random_streams import make_stream
from focusdrop.regularizers import (
    DropBlock, DropoutMode, FocusedDropout, GammaRange, OppositeDropout, RegularizerKind, RegularizerSpec,
    SpatialDropout, StandardDropout, build_regularizer, dropblock, spatial_dropout, standard_dropout,
)
from focusdrop.regularizers.dropblock import block_keep_mask, seed_rate

ALL_ACTIVE_KINDS = [k for k in RegularizerKind if k is not RegularizerKind.NONE]


def ones(shape):
    return Tensor(np.ones(shape))


# =============================================================================
# Inference identity
# =============================================================================

def test_every_regularizer_is_identity_at_inference():
    rng = np.random.default_rng(0)
    regularizers = [build_regularizer(RegularizerSpec(kind=kind, p=0.5, keep_prob=0.7)) for kind in ALL_ACTIVE_KINDS]
    diffs = 0
    for _ in range(100):
        batch = Tensor(rng.normal(size=(int(rng.integers(1, 5)), 3, 6, 6)))
        for reg in regularizers:
            out = reg(batch, DropoutMode.INFERENCE, make_stream(1, 'reg'))
            diffs += int(not np.array_equal(out.data, batch.data))
    assert diffs == 0


# =============================================================================
# Standard and spatial dropout
# =============================================================================

def test_standard_dropout_zero_rate_is_identity(rng):
    batch = Tensor(rng.normal(size=(2, 3, 4, 4)))
    assert standard_dropout(batch, 0.0, DropoutMode.TRAIN, rng) is batch
    assert standard_dropout(batch, 0.5, DropoutMode.INFERENCE, rng) is batch


def test_standard_dropout_rate_and_scaling():
    out = standard_dropout(ones((10, 10, 10, 100)), 0.5, DropoutMode.TRAIN, make_stream(4, 'reg')).data
    assert abs(np.mean(out == 0) - 0.5) < 0.01
    assert set(np.unique(out)) == {0.0, 2.0}


@pytest.mark.parametrize("fn", [standard_dropout, spatial_dropout])
@pytest.mark.parametrize("p", [1.0, 1.5, -0.1])
def test_dropout_rejects_bad_probability(fn, p):
    with pytest.raises(ValueError):
        fn(ones((1, 1, 2, 2)), p, DropoutMode.TRAIN, np.random.default_rng(0))


def test_spatial_dropout_drops_whole_channels():
    out = spatial_dropout(ones((50, 40, 3, 3)), 0.5, DropoutMode.TRAIN, make_stream(8, 'reg')).data
    per_channel = out.reshape(50, 40, -1)
    assert np.all(per_channel.min(axis=2) == per_channel.max(axis=2))
    dropped = np.mean(per_channel[:, :, 0] == 0)
    assert abs(dropped - 0.5) < 0.02


def test_spatial_dropout_identity_cases(rng):
    batch = Tensor(rng.normal(size=(2, 3, 4, 4)))
    assert spatial_dropout(batch, 0.0, DropoutMode.TRAIN, rng) is batch
    assert spatial_dropout(batch, 0.3, DropoutMode.INFERENCE, rng) is batch


def test_spatial_dropout_requires_4d():
    with pytest.raises(ShapeError):
        spatial_dropout(ones((2, 3)), 0.5, DropoutMode.TRAIN, np.random.default_rng(0))


def test_per_sample_masks_do_not_depend_on_batch_size():
    big = standard_dropout(ones((6, 2, 3, 3)), 0.5, DropoutMode.TRAIN, make_stream(2, 'reg')).data
    again = standard_dropout(ones((6, 2, 3, 3)), 0.5, DropoutMode.TRAIN, make_stream(2, 'reg')).data
    assert np.array_equal(big, again)


# =============================================================================
# DropBlock
# =============================================================================

def test_dropblock_keep_all_is_identity(rng):
    batch = Tensor(rng.normal(size=(2, 3, 6, 6)))
    assert dropblock(batch, 3, 1.0, DropoutMode.TRAIN, rng) is batch
    assert dropblock(batch, 3, 0.8, DropoutMode.INFERENCE, rng) is batch


def test_dropblock_block_larger_than_map():
    with pytest.raises(ShapeError):
        dropblock(ones((1, 1, 4, 4)), 5, 0.9, DropoutMode.TRAIN, np.random.default_rng(0))


@pytest.mark.parametrize("block_size,keep_prob", [(0, 0.9), (3, 0.0), (3, 1.2)])
def test_dropblock_rejects_bad_parameters(block_size, keep_prob):
    with pytest.raises(ValueError):
        dropblock(ones((1, 1, 8, 8)), block_size, keep_prob, DropoutMode.TRAIN, np.random.default_rng(0))


def test_seed_rate_formula():
    assert seed_rate(0.9, 3, 32, 32) == pytest.approx(0.1 / 9 * 1024 / 900)
    assert seed_rate(0.9, 1, 8, 8) == pytest.approx(0.1)


def test_block_keep_mask_expands_seeds():
    seeds = np.zeros((3, 3), dtype=bool)
    seeds[0, 1] = True
    keep = block_keep_mask(seeds, 2, 4, 4)
    expected = np.ones((4, 4), dtype=bool)
    expected[0:2, 1:3] = False
    assert np.array_equal(keep, expected)


def test_dropblock_regions_are_unions_of_blocks():
    block = 3
    out = dropblock(ones((20, 2, 10, 10)), block, 0.8, DropoutMode.TRAIN, make_stream(6, 'reg')).data
    for sample in out:
        assert np.array_equal(sample[0] == 0, sample[1] == 0)
        dropped = sample[0] == 0
        covered = np.zeros_like(dropped)
        for i in range(10 - block + 1):
            for j in range(10 - block + 1):
                if dropped[i:i + block, j:j + block].all():
                    covered[i:i + block, j:j + block] = True
        assert np.array_equal(covered, dropped)


def test_dropblock_rescales_to_preserve_sum():
    out = dropblock(ones((30, 1, 12, 12)), 3, 0.9, DropoutMode.TRAIN, make_stream(9, 'reg')).data
    sums = out.reshape(30, -1).sum(axis=1)
    kept_any = (out.reshape(30, -1) > 0).any(axis=1)
    np.testing.assert_allclose(sums[kept_any], 144.0, rtol=1e-5)
    fraction = np.mean(out == 0)
    assert 0.03 < fraction < 0.2


# =============================================================================
# Spec and factory
# =============================================================================

def test_factory_builds_every_kind():
    assert build_regularizer(RegularizerSpec()) is None
    expected = {
        RegularizerKind.STANDARD: StandardDropout,
        RegularizerKind.SPATIAL: SpatialDropout,
        RegularizerKind.DROPBLOCK: DropBlock,
        RegularizerKind.FOCUSED: FocusedDropout,
        RegularizerKind.OPPOSITE: OppositeDropout,
    }
    for kind, cls in expected.items():
        assert type(build_regularizer(RegularizerSpec(kind=kind))) is cls


def test_spec_default_insertion_points():
    assert RegularizerSpec(kind='dropblock').resolved_insertion_points() == ['first_two']
    assert RegularizerSpec(kind='focused').resolved_insertion_points() == ['penultimate']
    assert RegularizerSpec(kind='focused', insertion_points=['stage1']).resolved_insertion_points() == ['stage1']


def test_spec_round_trip_and_aliases():
    spec = RegularizerSpec(kind=RegularizerKind.FOCUSED, gamma=GammaRange(0.6, 0.9), insertion_points=['stage2'])
    again = RegularizerSpec.from_dict(spec.to_dict())
    assert again == spec
    single = RegularizerSpec.from_dict({'kind': 'focused', 'insertion_point': 'stage3', 'gamma': '0.9'})
    assert single.insertion_points == ['stage3']
    assert single.gamma.is_fixed


def test_spec_errors():
    with pytest.raises(ConfigError, match="Known"):
        RegularizerSpec(kind='cutout')
    with pytest.raises(ConfigError):
        RegularizerSpec.from_dict({'kind': 'focused', 'rate': 0.1})
    with pytest.raises(ConfigError):
        RegularizerSpec(kind='standard', p=1.0)
    with pytest.raises(ConfigError):
        RegularizerSpec(kind='dropblock', block_size=0)


def test_spec_describe():
    assert RegularizerSpec().describe() == "none"
    assert RegularizerSpec(kind='standard', p=0.3).describe() == "standard(p=0.3) @ penultimate"
    assert RegularizerSpec(kind='focused').describe() == "focused(gamma=0.3:0.6) @ penultimate"
