"""
Training harness - config, batch protocol, SGD, metrics logs and the experiment runner
"""

from .config import (
    ExpectedResult, ExperimentConfig, Protocol, Schedule, SeedConfig, apply_overrides, load_config, read_config_dict,
    save_config,
)
from .metrics import METRICS_COLUMNS, METRICS_SCHEMA_VERSION, STEP_COLUMNS, MetricsLog, StepLog, SweepLog, read_csv_log
from .optimizer import SGD, sgd_step
from .protocol import BatchPlan, lr_sequence, plan_batches, step_lr
from .runner import (
    ExperimentRunner, RunSummary, ablation_variants, evaluate, randomly_mwd_mode, run_ablation, run_experiment,
    run_sweep, sweep_configs,
)

__all__ = [
    'ExperimentConfig', 'Schedule', 'Protocol', 'SeedConfig', 'ExpectedResult',
    'load_config', 'save_config', 'apply_overrides', 'read_config_dict',
    'METRICS_COLUMNS', 'METRICS_SCHEMA_VERSION', 'STEP_COLUMNS', 'MetricsLog', 'StepLog', 'SweepLog', 'read_csv_log',
    'SGD', 'sgd_step', 'BatchPlan', 'plan_batches', 'step_lr', 'lr_sequence',
    'ExperimentRunner', 'RunSummary', 'evaluate', 'run_experiment', 'randomly_mwd_mode',
    'ablation_variants', 'sweep_configs', 'run_sweep', 'run_ablation',
]
