"""
Keeping ratios, CAM, reference-channel histograms and file export
"""

import numpy as np
import pandas as pd
import pytest

from focusdrop.analysis import (
    KeepStats, RefChannelHistogram, bilinear_upsample, cam, class_activation_map, export_heatmap, keeping_ratio,
    normalize_map, quantize_heatmap, read_heatmap_csv, read_pgm, reference_channel_histogram,
    write_histogram_csv, write_mask_csv, write_mask_pgm, write_mask_records_csv, write_pgm,
)
from focusdrop.data import make_synthetic_splits
from focusdrop.exceptions import ModelSpecError, ShapeError
from focusdrop.models import ModelSpec, build_model
from focusdrop.random_streams import make_stream
from focusdrop.regularizers import FeatureStack, build_focus_mask


def tiny():
    return build_model(ModelSpec(architecture='tiny-cnn', num_classes=3), make_stream(0, 'init'))


# =============================================================================
# Keeping ratio
# =============================================================================

def test_keeping_ratio_examples():
    assert keeping_ratio(np.array([[0, 0], [1, 1]])) == (0.5, 0.5)
    assert keeping_ratio(np.ones((3, 3))) == (0.0, 1.0)
    with pytest.raises(ValueError):
        keeping_ratio(np.zeros((0, 2)))


def test_keep_stats_epoch_mean():
    stats = KeepStats()
    stats.add(np.array([[0, 0], [1, 1]]))
    stats.add(np.array([[0, 1], [1, 1]]))
    stats.add(np.array([[0, 0], [0, 1]]))
    assert len(stats) == 3
    assert stats.mean_dropped == pytest.approx(0.5)
    assert stats.mean_retained == pytest.approx(0.5)
    stats.reset()
    assert stats.mean_dropped == 0.0


def test_keep_stats_accepts_focus_masks():
    stats = KeepStats()
    stats.extend([build_focus_mask(FeatureStack(np.array([[[1.0, 2.0], [3.0, 4.0]]])), 0.5)])
    assert stats.dropped == [0.5]


# =============================================================================
# CAM
# =============================================================================

def test_identity_weighting_returns_features():
    features = np.arange(6, dtype=np.float64).reshape(1, 2, 3)
    assert np.array_equal(class_activation_map(features, np.array([1.0])), features[0])


def test_class_activation_map_weights_channels():
    features = np.stack([np.ones((2, 2)), np.eye(2)])
    np.testing.assert_allclose(class_activation_map(features, np.array([2.0, -1.0])), [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ShapeError):
        class_activation_map(features, np.array([1.0]))


def test_bilinear_upsample_half_pixel_centres():
    out = bilinear_upsample(np.array([[0.0, 1.0]]), (1, 4))
    np.testing.assert_allclose(out, [[0.0, 0.25, 0.75, 1.0]])
    values = np.random.default_rng(0).random((3, 5))
    assert np.array_equal(bilinear_upsample(values, (3, 5)), values)


def test_normalize_map():
    normalized, value_range = normalize_map(np.array([[2.0, 4.0], [3.0, 6.0]]))
    np.testing.assert_allclose(normalized, [[0.0, 0.5], [0.25, 1.0]])
    assert value_range == (2.0, 6.0)
    flat, _ = normalize_map(np.full((2, 2), 3.0))
    assert np.all(flat == 0.0)


def test_cam_on_tiny_cnn(rng):
    model = tiny()
    image = rng.normal(size=(3, 8, 8)).astype(np.float32)
    result = cam(model, image, class_index=1)
    assert result.shape == (8, 8)
    assert result.heatmap.min() == 0.0 and result.heatmap.max() == 1.0
    assert result.feature_map.shape == (2, 2)
    assert not model.training


def test_cam_ignores_classifier_bias(rng):
    model = tiny()
    image = rng.normal(size=(3, 8, 8)).astype(np.float32)
    before = cam(model, image, 0).heatmap
    model.classifier.bias.data[:] = 100.0
    assert np.array_equal(cam(model, image, 0).heatmap, before)


def test_cam_zero_weights_gives_zero_map(rng):
    model = tiny()
    model.classifier.weight.data[:] = 0.0
    result = cam(model, rng.normal(size=(3, 8, 8)).astype(np.float32), 2)
    assert np.all(result.feature_map == 0.0)
    assert np.all(result.heatmap == 0.0)


def test_cam_argument_errors(rng):
    model = tiny()
    with pytest.raises(ValueError):
        cam(model, rng.normal(size=(3, 8, 8)), 3)
    with pytest.raises(ShapeError):
        cam(model, rng.normal(size=(1, 3, 8, 8)), 0)
    model.classifier = None
    with pytest.raises(ModelSpecError):
        cam(model, rng.normal(size=(3, 8, 8)), 0)


# =============================================================================
# Reference-channel histogram
# =============================================================================

def test_constant_features_pick_channel_zero():
    splits = make_synthetic_splits(3, 10, 8, seed=1)
    model = tiny()
    # stage3 = maxpool, conv, bn, relu; zero conv + unit BN shift makes every channel 1 in eval mode
    model.stages[2][1].weight.data[:] = 0.0
    model.stages[2][2].bias.data[:] = 1.0
    histogram = reference_channel_histogram(model, splits.test)
    assert histogram.counts.shape == (3, 32)
    assert np.all(histogram.counts[:, 1:] == 0)
    assert np.array_equal(histogram.counts[:, 0], histogram.correct_per_class)
    assert histogram.correct_per_class.sum() > 0
    assert histogram.total_per_class.tolist() == [10, 10, 10]


def test_histogram_frame_and_shares():
    histogram = RefChannelHistogram(
        counts=np.array([[3, 1, 0], [0, 0, 0]]),
        correct_per_class=np.array([4, 0]),
        total_per_class=np.array([5, 5]),
    )
    assert histogram.top_channel(0) == 0
    assert histogram.top_share(0) == 0.75
    assert histogram.top_share(1) == 0.0
    frame = histogram.to_frame()
    assert list(frame.columns) == ['class', 'correct', 'top_channel', 'top_share', 'ch_0', 'ch_1', 'ch_2']


def test_histogram_rows_sum_to_correct_counts(rng):
    splits = make_synthetic_splits(3, 8, 8, seed=2)
    histogram = reference_channel_histogram(tiny(), splits.test, batch_size=5)
    assert np.array_equal(histogram.counts.sum(axis=1), histogram.correct_per_class)
    assert np.all(histogram.correct_per_class <= histogram.total_per_class)


# =============================================================================
# Export
# =============================================================================

def test_heatmap_quantization_rounds_half_to_even():
    pixels = quantize_heatmap(np.array([[0.0, 1.0], [0.5, 0.25]]))
    assert pixels.tolist() == [[0, 255], [128, 64]]
    assert np.all(quantize_heatmap(np.full((3, 3), 0.7)) == 0)


def test_export_heatmap_files(tmp_path):
    values = np.array([[0.0, 1.0], [0.5, 0.25]]) / 3.0
    pgm_path, csv_path = export_heatmap(values, tmp_path / 'maps' / 'cam.pgm')
    assert pgm_path.name == 'cam.pgm' and csv_path.name == 'cam.csv'
    pixels, maxval = read_pgm(pgm_path)
    assert maxval == 255
    assert pixels.tolist() == [[0, 255], [128, 64]]
    assert np.array_equal(read_heatmap_csv(csv_path), values)


def test_pgm_header_and_validation(tmp_path):
    write_pgm(np.array([[1, 2, 3]], dtype=np.uint8), tmp_path / 'row.pgm')
    assert (tmp_path / 'row.pgm').read_bytes() == b'P5\n3 1\n255\n\x01\x02\x03'
    with pytest.raises(ValueError):
        write_pgm(np.array([[300]]), tmp_path / 'bad.pgm')
    (tmp_path / 'ascii.pgm').write_bytes(b'P2\n1 1\n255\n0\n')
    with pytest.raises(ValueError, match="binary PGM"):
        read_pgm(tmp_path / 'ascii.pgm')


def test_mask_exports(tmp_path):
    focus = build_focus_mask(FeatureStack(np.array([[[1.0, 2.0], [3.0, 4.0]]])), 0.5)
    write_mask_pgm(focus, tmp_path / 'mask.pgm')
    pixels, maxval = read_pgm(tmp_path / 'mask.pgm')
    assert maxval == 1
    assert pixels.tolist() == [[0, 0], [1, 1]]

    write_mask_csv(focus, tmp_path / 'mask.csv')
    assert (tmp_path / 'mask.csv').read_text() == "0,0\n1,1\n"

    frame = write_mask_records_csv([focus, focus], tmp_path / 'records.csv')
    read_back = pd.read_csv(tmp_path / 'records.csv')
    assert list(read_back.columns) == list(frame.columns)
    assert read_back['dropped_fraction'].tolist() == [0.5, 0.5]
    assert read_back['ref_channel'].tolist() == [0, 0]


def test_histogram_csv(tmp_path):
    histogram = RefChannelHistogram(counts=np.array([[2, 0]]), correct_per_class=np.array([2]),
                                    total_per_class=np.array([2]))
    write_histogram_csv(histogram, tmp_path / 'hist.csv')
    frame = pd.read_csv(tmp_path / 'hist.csv')
    assert frame.loc[0, 'ch_0'] == 2 and frame.loc[0, 'top_share'] == 1.0


def test_tensor_features_are_not_modified_by_cam(rng):
    model = tiny()
    image = rng.normal(size=(3, 8, 8)).astype(np.float32)
    copy = image.copy()
    cam(model, image, 0)
    assert np.array_equal(image, copy)
