"""
Architectures, regularizer insertion and checkpoints
"""

import numpy as np
import pytest

from focusdrop.autograd import Tensor, no_grad, softmax_cross_entropy
from focusdrop.exceptions import ModelSpecError, ShapeError
from focusdrop.models import ModelSpec, build_model, insert_regularizer, load_checkpoint, save_checkpoint
from focusdrop.random_streams import make_stream
from focusdrop.regularizers import FocusedDropout, RegularizerKind, RegularizerSpec


def tiny(num_classes=3, seed=0):
    return build_model(ModelSpec(architecture='tiny-cnn', num_classes=num_classes), make_stream(seed, 'init'))


def images(rng, n=4, size=8):
    return Tensor(rng.normal(size=(n, 3, size, size)))


# =============================================================================
# Specs and shapes
# =============================================================================

def test_tiny_cnn_logits_shape(rng):
    assert tiny()(images(rng)).shape == (4, 3)


def test_tiny_cnn_parameter_count():
    # 3x3 convs 3->8->16->32 with BN, linear 32->3
    assert tiny().parameter_count() == 216 + 16 + 1152 + 32 + 4608 + 64 + 99


def test_resnet20_shape_and_parameter_count(rng):
    model = build_model(ModelSpec(architecture='resnet', depth=20), make_stream(0, 'init'))
    assert model.parameter_count() == 272_474
    model.eval()
    with no_grad():
        assert model(images(rng, n=2, size=32)).shape == (2, 10)


def test_vgg_logits_shape(rng):
    model = build_model(ModelSpec(architecture='vgg', num_classes=5, widths=[4, 8, 8]), make_stream(0, 'init'))
    assert model(images(rng, n=2, size=16)).shape == (2, 5)


def test_unknown_architecture_lists_known():
    with pytest.raises(ModelSpecError, match="resnet, tiny-cnn, vgg"):
        ModelSpec(architecture='densenet')


@pytest.mark.parametrize("kwargs", [{'architecture': 'resnet', 'depth': 21}, {'widths': [8]}, {'num_classes': 1}])
def test_model_spec_validation(kwargs):
    with pytest.raises(ModelSpecError):
        ModelSpec(**kwargs)


def test_insertion_point_resolution():
    spec = ModelSpec(architecture='tiny-cnn', num_classes=3)
    assert spec.stage_names == ['stage1', 'stage2', 'stage3']
    assert spec.resolve_insertion_points(['penultimate']) == ['stage2']
    assert spec.resolve_insertion_points(['first_two', 'stage2']) == ['stage1', 'stage2']
    with pytest.raises(ModelSpecError, match="stage9"):
        spec.resolve_insertion_points(['stage9'])


def test_state_dict_names():
    state = build_model(ModelSpec(architecture='resnet', depth=20), make_stream(0, 'init')).state_dict()
    assert 'stem.0.weight' in state
    assert 'stage2.0.conv1.weight' in state
    assert 'stage2.0.shortcut.0.weight' in state
    assert 'stage1.2.bn2.running_var' in state
    assert 'classifier.weight' in state


def test_init_is_deterministic():
    first, second = tiny(seed=3).state_dict(), tiny(seed=3).state_dict()
    assert all(np.array_equal(first[k], second[k]) for k in first)


# =============================================================================
# Forward behaviour
# =============================================================================

def test_eval_forward_is_bit_identical(rng):
    model = tiny().eval()
    x = images(rng)
    assert np.array_equal(model(x).data, model(x).data)


def test_no_regularizer_leaves_forward_unchanged(rng):
    plain, regularized = tiny(), tiny()
    insert_regularizer(regularized, RegularizerSpec())
    assert regularized.regularizers == {}
    x = images(rng)
    assert np.array_equal(plain(x, reg_active=True, reg_rng=make_stream(0, 'reg')).data,
                          regularized(x, reg_active=True, reg_rng=make_stream(0, 'reg')).data)


def test_focused_in_inference_mode_leaves_logits_unchanged(rng):
    plain, regularized = tiny().eval(), tiny().eval()
    insert_regularizer(regularized, RegularizerSpec(kind=RegularizerKind.FOCUSED))
    assert isinstance(regularized.regularizers['stage2'], FocusedDropout)
    x = images(rng)
    assert np.array_equal(plain(x).data, regularized(x, reg_active=True, reg_rng=make_stream(0, 'reg')).data)


def test_inactive_regularizer_in_training_mode_is_a_no_op(rng):
    plain, regularized = tiny(), tiny()
    insert_regularizer(regularized, RegularizerSpec(kind=RegularizerKind.FOCUSED))
    x = images(rng)
    assert np.array_equal(plain(x).data, regularized(x, reg_active=False).data)


def test_degenerate_masks_leave_logits_unchanged(rng):
    model = tiny()
    # stage2 = conv, bn, relu; a zero-scale negative-shift BN makes every activation 0
    bn = model.stages[1][1]
    bn.weight.data[:] = 0.0
    bn.bias.data[:] = -1.0
    x = images(rng)
    expected = model(x).data
    insert_regularizer(model, RegularizerSpec(kind=RegularizerKind.FOCUSED))
    out = model(x, reg_active=True, reg_rng=make_stream(0, 'reg')).data
    assert np.array_equal(out, expected)
    assert all(r.degenerate for r in model.regularizers['stage2'].last_masks)


def test_active_focused_changes_training_logits(rng):
    model = tiny()
    insert_regularizer(model, RegularizerSpec(kind=RegularizerKind.FOCUSED))
    x = images(rng)
    plain = model(x).data
    masked = model(x, reg_active=True, reg_rng=make_stream(0, 'reg')).data
    assert not np.array_equal(plain, masked)


def test_dropblock_inserts_after_first_two_stages():
    model = tiny()
    insert_regularizer(model, RegularizerSpec(kind=RegularizerKind.DROPBLOCK, block_size=2))
    assert list(model.regularizers) == ['stage1', 'stage2']


def test_unresolvable_insertion_point_is_an_error():
    with pytest.raises(ModelSpecError):
        insert_regularizer(tiny(), RegularizerSpec(kind='focused', insertion_points=['stage7']))


def test_backward_reaches_every_parameter(rng):
    model = tiny()
    labels = np.array([0, 1, 2, 0])
    softmax_cross_entropy(model(images(rng)), labels).backward()
    assert all(p.grad is not None and p.grad.shape == p.shape for p in model.parameters())


# =============================================================================
# Checkpoints
# =============================================================================

def test_checkpoint_round_trip(tmp_path, rng):
    model = tiny()
    labels = np.array([0, 1, 2, 0])
    # one training-mode pass so the running stats move off their init values
    softmax_cross_entropy(model(images(rng)), labels)
    model.eval()
    x = images(rng)
    expected = model(x).data

    manifest_path = save_checkpoint(model, tmp_path / 'best', extra={'epoch': 3})
    assert manifest_path.name == 'best.manifest.json'
    restored, manifest = load_checkpoint(tmp_path / 'best.fnt')
    assert not restored.training
    assert manifest['extra'] == {'epoch': 3}
    assert manifest['model']['architecture'] == 'tiny-cnn'
    assert np.array_equal(restored(x).data, expected)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / 'nothing')


def test_load_state_dict_mismatches():
    model = tiny()
    state = model.state_dict()
    extra = dict(state, bogus=np.zeros(1))
    with pytest.raises(ModelSpecError, match="bogus"):
        model.load_state_dict(extra)
    state['classifier.bias'] = np.zeros(7)
    with pytest.raises(ShapeError, match="classifier.bias"):
        model.load_state_dict(state)
