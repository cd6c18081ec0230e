"""
Desk-scale training runs on the shipped tiny configs (about a minute each)

Deselect with ``pytest -m "not slow"``.
"""

import logging
from pathlib import Path

import numpy as np
import pytest

from focusdrop.training import load_config, read_csv_log, run_experiment

logger = logging.getLogger(__name__)

pytestmark = pytest.mark.slow

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'configs'


@pytest.fixture(scope='module')
def runs_root(tmp_path_factory):
    return tmp_path_factory.mktemp('smoke')


@pytest.fixture(scope='module')
def baseline(runs_root):
    return run_experiment(load_config(CONFIG_DIR / 'tiny_baseline.yaml'), runs_root)


@pytest.fixture(scope='module')
def focused(runs_root):
    return run_experiment(load_config(CONFIG_DIR / 'tiny_focused.yaml'), runs_root)


def test_baseline_learns_the_synthetic_task(baseline):
    logger.info(f"baseline best test_acc {baseline.best_test_acc:.4f} in {baseline.wall_time_s:.1f}s")
    assert baseline.best_test_acc >= 0.90
    assert baseline.wall_time_s < 180.0


def test_focused_tracks_baseline_with_real_masks(baseline, focused):
    logger.info(f"focused best test_acc {focused.best_test_acc:.4f}, "
                f"active {focused.active_batches}/{focused.total_batches}")
    assert abs(focused.best_test_acc - baseline.best_test_acc) <= 0.03
    assert 0.04 <= focused.active_batches / focused.total_batches <= 0.17

    metrics = read_csv_log(Path(focused.output_dir) / 'metrics.csv')
    fired = metrics[metrics['active_batch_count'] > 0]
    assert len(fired) > 0
    assert ((fired['dropped_fraction'] > 0.0) & (fired['dropped_fraction'] < 1.0)).all()


def fixed_gamma_run(runs_root, gamma):
    config = load_config(CONFIG_DIR / 'tiny_focused.yaml', [
        f"gamma={gamma}", "participation_rate=0.5", "schedule.epochs=3", f"name=tiny-focused-gamma-{gamma}",
    ])
    metrics = read_csv_log(Path(run_experiment(config, runs_root).output_dir) / 'metrics.csv')
    fired = metrics[metrics['active_batch_count'] > 0]
    assert len(fired) == len(metrics)
    return float(fired['dropped_fraction'].mean())


def test_higher_gamma_drops_more_units_during_training(runs_root):
    low = fixed_gamma_run(runs_root, 0.3)
    high = fixed_gamma_run(runs_root, 0.9)
    logger.info(f"epoch-mean dropped fraction: gamma 0.3 -> {low:.3f}, gamma 0.9 -> {high:.3f}")
    assert np.isfinite(low) and np.isfinite(high)
    assert high > low
