"""
Batch protocol, optimizer, configs and short end-to-end runs
"""

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from focusdrop.autograd import Tensor, matmul
from focusdrop.exceptions import ConfigError, NonFiniteError, ShapeError
from focusdrop.models import Parameter, load_checkpoint
from focusdrop.regularizers import GammaRange, RegularizerKind
from focusdrop.random_streams import make_stream
from focusdrop.training import (
    METRICS_COLUMNS, SGD, STEP_COLUMNS, ExpectedResult, ExperimentConfig, ablation_variants, apply_overrides,
    load_config, lr_sequence, plan_batches, randomly_mwd_mode, read_csv_log, run_ablation, run_experiment,
    run_sweep, save_config, sgd_step, step_lr, sweep_configs,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'configs'


# =============================================================================
# Batch plan and LR schedule
# =============================================================================

def test_plan_extreme_rates():
    assert plan_batches(50, 0.0, make_stream(0, 'plan')).active_count == 0
    assert plan_batches(50, 1.0, make_stream(0, 'plan')).active_count == 50


def test_plan_active_fraction_and_weight_decay():
    plan = plan_batches(10_000, 0.1, make_stream(1, 'plan'), base_weight_decay=5e-4, mwd_weight_decay=1e-3)
    assert abs(plan.active_fraction - 0.1) < 0.01
    assert np.all(plan.weight_decay[plan.active] == 1e-3)
    assert np.all(plan.weight_decay[~plan.active] == 5e-4)


def test_plan_without_magnification():
    plan = plan_batches(100, 0.5, make_stream(1, 'plan'), magnify=False)
    assert plan.active_count > 0
    assert np.all(plan.weight_decay == 5e-4)


def test_plan_exact_fraction():
    plan = plan_batches(40, 0.1, make_stream(2, 'plan'), exact=True)
    assert plan.active_count == 4


def test_plan_rejects_bad_rate():
    with pytest.raises(ValueError):
        plan_batches(10, 1.5, make_stream(0, 'plan'))


def test_step_lr_sequence():
    assert lr_sequence(5, 0.1, [2, 4]) == pytest.approx([0.1, 0.1, 0.01, 0.01, 0.001])
    assert step_lr(0, 0.1, []) == 0.1


# =============================================================================
# SGD
# =============================================================================

def test_vanilla_step_subtracts_gradient():
    p = np.array([1.0, 2.0, 3.0])
    g = np.array([0.5, -1.0, 0.25])
    sgd_step([p], [g], [np.zeros(3)], lr=1.0, momentum=0.0, weight_decay=0.0)
    assert p.tolist() == [0.5, 3.0, 2.75]


def test_pure_decay_scales_parameters():
    p = np.array([1.0, -2.0])
    sgd_step([p], [np.zeros(2)], [np.zeros(2)], lr=0.1, momentum=0.0, weight_decay=0.01)
    np.testing.assert_allclose(p, np.array([1.0, -2.0]) * (1 - 0.1 * 0.01))


def test_momentum_accumulates():
    p, v = np.array([0.0]), np.zeros(1)
    for _ in range(2):
        sgd_step([p], [np.array([1.0])], [v], lr=1.0, momentum=0.9, weight_decay=0.0)
    # v1 = 1, v2 = 1.9
    assert p[0] == pytest.approx(-2.9)
    assert v[0] == pytest.approx(1.9)


def test_non_finite_backward_gradient_is_reported_by_parameter_name():
    weight = Parameter(np.ones((2, 3)))
    out = matmul(Tensor(np.ones((1, 2))), weight).sum()
    out.backward(np.array(np.inf))
    assert np.all(np.isinf(weight.grad))
    with pytest.raises(NonFiniteError, match="head.weight"):
        SGD([("head.weight", weight)]).step(lr=0.1, weight_decay=0.0)
    assert np.all(weight.data == 1.0)


def test_non_finite_gradient_names_parameter_and_updates_nothing():
    a, b = np.array([1.0]), np.array([2.0])
    with pytest.raises(NonFiniteError, match="stage2.weight"):
        sgd_step([a, b], [np.array([0.1]), np.array([np.nan])], [np.zeros(1), np.zeros(1)],
                 lr=1.0, momentum=0.0, weight_decay=0.0, names=['stem.weight', 'stage2.weight'])
    assert a[0] == 1.0 and b[0] == 2.0


def test_gradient_shape_mismatch():
    with pytest.raises(ShapeError):
        sgd_step([np.zeros(2)], [np.zeros(3)], [np.zeros(2)], lr=1.0, momentum=0.0, weight_decay=0.0)


def test_sgd_skips_parameters_without_gradients():
    used, unused = Parameter(np.ones(2)), Parameter(np.ones(2))
    optimizer = SGD([('used', used), ('unused', unused)], momentum=0.0)
    used.grad = np.ones(2, dtype=np.float32)
    optimizer.step(lr=0.5, weight_decay=0.0)
    assert used.data.tolist() == [0.5, 0.5]
    assert unused.data.tolist() == [1.0, 1.0]
    assert used.data.dtype == np.float32


# =============================================================================
# Configs
# =============================================================================

def test_shipped_configs_load():
    paths = sorted(CONFIG_DIR.glob('*.yaml')) + sorted((CONFIG_DIR / 'cifar').glob('*.yaml'))
    assert len(paths) == 11
    for path in paths:
        config = load_config(path)
        assert config.name == path.stem


def test_cifar_configs_carry_expectations():
    config = load_config(CONFIG_DIR / 'cifar' / 'resnet56_cifar10_focused.yaml')
    assert config.model.depth == 56
    assert config.schedule.lr_milestones == [150, 225]
    assert config.expected.test_acc == 94.67
    assert config.expected.check(94.3) and not config.expected.check(94.0)


def test_overrides_and_aliases():
    config = load_config(CONFIG_DIR / 'tiny_focused.yaml',
                         ['participation_rate=0.3', 'gamma=0.6:0.9', 'mwd=0.002', 'schedule.epochs=3'])
    assert config.protocol.participation_rate == 0.3
    assert config.regularizer.gamma == GammaRange(0.6, 0.9)
    assert config.protocol.mwd_weight_decay == 0.002
    assert config.schedule.epochs == 3


def test_apply_overrides_does_not_mutate_input():
    data = {'protocol': {'participation_rate': 0.1}}
    out = apply_overrides(data, ['rate=0.5'])
    assert data['protocol']['participation_rate'] == 0.1
    assert out['protocol']['participation_rate'] == 0.5


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="lr_max"):
        ExperimentConfig.from_dict({'schedule': {'lr_max': 1}})
    with pytest.raises(ConfigError, match="num_classes"):
        ExperimentConfig.from_dict({'model': {'architecture': 'tiny-cnn', 'num_classes': 5}})
    with pytest.raises(ConfigError, match="participation_rate"):
        ExperimentConfig.from_dict({'protocol': {'participation_rate': 2.0}})
    with pytest.raises(ConfigError):
        apply_overrides({}, ['no_equals_sign'])
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / 'missing.yaml')
    (tmp_path / 'list.yaml').write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / 'list.yaml')


def test_save_and_reload_config(tmp_path, tiny_config):
    config = tiny_config(kind=RegularizerKind.FOCUSED)
    config.expected = ExpectedResult(test_acc=90.0)
    save_config(config, tmp_path / 'saved.yaml')
    reloaded = load_config(tmp_path / 'saved.yaml')
    assert reloaded.to_dict() == config.to_dict()
    assert yaml.safe_load((tmp_path / 'saved.yaml').read_text())['regularizer']['gamma'] == [0.3, 0.6]


def test_weight_decay_magnification_rules(tiny_config):
    assert not tiny_config().magnify_weight_decay
    assert tiny_config(kind=RegularizerKind.FOCUSED).magnify_weight_decay
    assert not tiny_config(kind=RegularizerKind.FOCUSED, mwd_enabled=False).magnify_weight_decay
    randomly = randomly_mwd_mode(tiny_config(kind=RegularizerKind.FOCUSED))
    assert randomly.magnify_weight_decay and not randomly.regularizer_fires


# =============================================================================
# Runs
# =============================================================================

def test_run_writes_outputs(tiny_config):
    config = tiny_config(kind=RegularizerKind.FOCUSED, rate=0.5)
    summary = run_experiment(config)
    out = Path(summary.output_dir)
    for name in ('config.yaml', 'dataset.manifest', 'metrics.csv', 'steps.csv', 'summary.json',
                 'best.fnt', 'best.manifest.json', 'last.fnt', 'last.manifest.json'):
        assert (out / name).exists(), name

    metrics = read_csv_log(out / 'metrics.csv')
    assert list(metrics.columns) == METRICS_COLUMNS
    assert len(metrics) == 2
    assert summary.best_test_acc == pytest.approx(metrics['test_acc'].max())
    assert 0.0 <= summary.best_test_acc <= 1.0
    assert summary.total_batches == 2 * 4

    data = json.loads((out / 'summary.json').read_text())
    assert data['metrics_schema_version'] == 1

    model, manifest = load_checkpoint(out / 'best')
    assert manifest['extra']['epoch'] == summary.best_epoch
    assert model.spec.architecture == 'tiny-cnn'


def test_step_log_matches_batch_plan(tiny_config):
    config = tiny_config(kind=RegularizerKind.FOCUSED, rate=0.5, epochs=3)
    summary = run_experiment(config)
    steps = read_csv_log(Path(summary.output_dir) / 'steps.csv', STEP_COLUMNS)
    active = steps['active'] == 1
    assert (steps.loc[active, 'weight_decay'] == 1e-3).all()
    assert (steps.loc[~active, 'weight_decay'] == 5e-4).all()
    assert int(active.sum()) == summary.active_batches
    metrics = read_csv_log(Path(summary.output_dir) / 'metrics.csv')
    fired = metrics['active_batch_count'] > 0
    assert ((metrics.loc[fired, 'dropped_fraction'] > 0) & (metrics.loc[fired, 'dropped_fraction'] < 1)).all()


def test_zero_rate_focused_matches_baseline_bit_for_bit(tiny_config):
    baseline = run_experiment(tiny_config(name='baseline', rate=0.0))
    focused = run_experiment(tiny_config(name='focused', kind=RegularizerKind.FOCUSED, rate=0.0))
    for name in ('metrics.csv', 'steps.csv'):
        assert (Path(baseline.output_dir) / name).read_bytes() == (Path(focused.output_dir) / name).read_bytes()


def test_runs_are_reproducible(tiny_config):
    first = run_experiment(tiny_config(name='first', kind=RegularizerKind.FOCUSED, rate=0.5))
    second = run_experiment(tiny_config(name='second', kind=RegularizerKind.FOCUSED, rate=0.5))
    assert (Path(first.output_dir) / 'metrics.csv').read_bytes() == \
        (Path(second.output_dir) / 'metrics.csv').read_bytes()


def test_reg_seed_changes_focused_run(tiny_config):
    first = tiny_config(name='seed3', kind=RegularizerKind.FOCUSED, rate=1.0)
    second = tiny_config(name='seed4', kind=RegularizerKind.FOCUSED, rate=1.0)
    second.seeds.reg = 4
    a, b = run_experiment(first), run_experiment(second)
    assert a.history != b.history


def test_randomly_mwd_at_rate_zero_is_the_baseline(tiny_config):
    baseline = run_experiment(tiny_config(name='baseline', rate=0.0))
    randomly = run_experiment(randomly_mwd_mode(tiny_config(name='rmwd', kind=RegularizerKind.FOCUSED, rate=0.0)))
    assert (Path(baseline.output_dir) / 'steps.csv').read_bytes() == \
        (Path(randomly.output_dir) / 'steps.csv').read_bytes()


def test_randomly_mwd_at_rate_one_uses_elevated_decay_throughout(tiny_config):
    summary = run_experiment(randomly_mwd_mode(tiny_config(kind=RegularizerKind.FOCUSED, rate=1.0)))
    steps = read_csv_log(Path(summary.output_dir) / 'steps.csv', STEP_COLUMNS)
    assert (steps['weight_decay'] == 1e-3).all()
    metrics = read_csv_log(Path(summary.output_dir) / 'metrics.csv')
    # no mask is ever applied
    assert (metrics['dropped_fraction'] == 0.0).all()


def test_ablation_variant_definitions(tiny_config):
    variants = ablation_variants(tiny_config(kind=RegularizerKind.FOCUSED))
    assert list(variants) == ['baseline', 'randomly_mwd', 'focused_without_mwd', 'opposite_without_mwd',
                              'opposite', 'focused']
    assert variants['baseline'].regularizer.is_none
    assert variants['opposite'].regularizer.kind is RegularizerKind.OPPOSITE
    assert variants['opposite'].magnify_weight_decay
    assert not variants['focused_without_mwd'].magnify_weight_decay
    assert variants['randomly_mwd'].protocol.randomly_mwd
    assert len({v.output_dir for v in variants.values()}) == 6


def test_run_ablation_subset(tiny_config):
    path, summaries = run_ablation(tiny_config(kind=RegularizerKind.FOCUSED, epochs=1),
                                   variants=['baseline', 'opposite'])
    assert set(summaries) == {'baseline', 'opposite'}
    rows = read_csv_log(path, ['param', 'value', 'best_test_acc', 'final_dropped_fraction',
                               'final_retained_fraction', 'run_dir'])
    assert rows['value'].tolist() == ['baseline', 'opposite']
    with pytest.raises(ConfigError):
        run_ablation(tiny_config(), variants=['dropconnect'])


def test_sweep_configs_and_run(tiny_config):
    base = tiny_config(kind=RegularizerKind.FOCUSED, epochs=1)
    configs = sweep_configs(base, 'gamma', ['0.3', '0.9'])
    assert [c.regularizer.gamma for _, c in configs] == [GammaRange.fixed(0.3), GammaRange.fixed(0.9)]
    with pytest.raises(ConfigError):
        sweep_configs(base, 'momentum', [0.5])

    path, summaries = run_sweep(base, 'participation_rate', [0.0, 1.0])
    assert len(summaries) == 2
    assert summaries[0].active_batches == 0
    assert summaries[1].active_batches == summaries[1].total_batches
    assert path.name == 'run-sweep-participation_rate.csv'
