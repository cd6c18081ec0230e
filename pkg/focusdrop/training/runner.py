"""
Experiment runner

Trains one ExperimentConfig end to end:
1. Build data splits and the model (separate data / augment / init / reg / plan streams)
2. Each epoch: plan active batches, train with per-step LR and weight decay, evaluate on test
3. Log metrics.csv and steps.csv, keep the best and last checkpoints, write summary.json

Also derives the ablation suite and parameter sweeps from a base config.
"""

import copy
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..analysis import KeepStats
from ..autograd import Tensor, no_grad, softmax_cross_entropy
from ..data import DataSplits, augment, iterate_batches, load_splits, num_batches, write_manifest
from ..exceptions import ConfigError, FocusdropError
from ..models import StagedNetwork, build_model, insert_regularizer, save_checkpoint
from ..random_streams import RandomStreams
from ..regularizers import GammaRange, RegularizerKind, RegularizerSpec
from .config import ExperimentConfig, apply_overrides, save_config
from .metrics import METRICS_SCHEMA_VERSION, MetricsLog, StepLog, SweepLog
from .optimizer import SGD
from .protocol import plan_batches, step_lr

logger = logging.getLogger(__name__)


@dataclass
class RunSummary:
    """Outcome of one run; accuracies are fractions in [0, 1]"""
    name: str
    output_dir: str
    epochs: int
    best_test_acc: float
    best_epoch: int
    final_test_acc: float
    final_dropped_fraction: float
    final_retained_fraction: float
    active_batches: int
    total_batches: int
    parameter_count: int
    wall_time_s: float = 0.0
    expected: Optional[Dict[str, Any]] = None
    history: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data = {k: v for k, v in vars(self).items() if k != 'history'}
        data['metrics_schema_version'] = METRICS_SCHEMA_VERSION
        return data


def evaluate(model: StagedNetwork, dataset, batch_size: int = 256) -> Tuple[float, float]:
    """(mean loss, accuracy) over ``dataset`` in eval mode; leaves the model in eval mode."""
    model.eval()
    total_loss, correct = 0.0, 0
    with no_grad():
        for images, labels in iterate_batches(dataset, batch_size, shuffle=False):
            logits = model(Tensor(images))
            total_loss += float(softmax_cross_entropy(logits, labels).item()) * len(labels)
            correct += int(np.count_nonzero(logits.data.argmax(axis=1) == labels))
    n = max(len(dataset), 1)
    return total_loss / n, correct / n


class ExperimentRunner:
    """Runs one experiment config and writes its output directory"""

    def __init__(self, config: ExperimentConfig, output_root: Optional[Path] = None):
        self.config = config
        self.output_dir = config.output_path(output_root)
        self.streams = RandomStreams.from_seeds(config.seeds.data, config.seeds.init, config.seeds.reg)

    def build_data(self) -> DataSplits:
        return load_splits(self.config.data)

    def build_model(self) -> StagedNetwork:
        model = build_model(self.config.model, self.streams.init)
        if self.config.regularizer_fires:
            insert_regularizer(model, self.config.regularizer)
        return model

    def _prepare_output(self, splits: DataSplits):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        save_config(self.config, self.output_dir / 'config.yaml')
        write_manifest(splits.manifest(), self.output_dir / 'dataset.manifest')

    def _checkpoint_extra(self, splits: DataSplits, epoch: int, test_acc: float) -> Dict[str, Any]:
        return {
            'epoch': epoch,
            'test_acc': test_acc,
            'normalization': splits.normalization.to_dict(),
            'data': self.config.data.to_dict(),
            'config': self.config.to_dict(),
        }

    def train_epoch(self, epoch: int, model: StagedNetwork, optimizer: SGD, splits: DataSplits, lr: float,
                    step_log: StepLog) -> Dict[str, Any]:
        config = self.config
        train = splits.train
        plan = plan_batches(
            num_batches(len(train), config.schedule.batch_size), config.protocol.participation_rate,
            self.streams.plan, config.protocol.base_weight_decay, config.protocol.mwd_weight_decay,
            exact=config.protocol.exact_fraction, magnify=config.magnify_weight_decay,
        )
        keep_stats = KeepStats()
        total_loss, correct = 0.0, 0

        model.train()
        batches = iterate_batches(train, config.schedule.batch_size, self.streams.data)
        for step, (images, labels) in enumerate(batches):
            images = augment(images, config.augment, self.streams.augment)
            active = bool(plan.active[step])
            fires = active and config.regularizer_fires
            weight_decay = float(plan.weight_decay[step])

            optimizer.zero_grad()
            logits = model(Tensor(images), reg_active=fires, reg_rng=self.streams.reg if fires else None)
            loss = softmax_cross_entropy(logits, labels)
            loss.backward()
            optimizer.step(lr, weight_decay)

            if fires:
                for regularizer in model.regularizers.values():
                    keep_stats.extend(regularizer.last_masks)
            batch_loss = float(loss.item())
            total_loss += batch_loss * len(labels)
            correct += int(np.count_nonzero(logits.data.argmax(axis=1) == labels))
            step_log.append(epoch=epoch, step=step, active=int(active), weight_decay=weight_decay, lr=lr,
                            loss=batch_loss)
            logger.debug(f"epoch {epoch} step {step}: loss={batch_loss:.4f} active={active} wd={weight_decay:g}")

        return {
            'train_loss': total_loss / len(train),
            'train_acc': correct / len(train),
            'active_batch_count': plan.active_count,
            'total_batches': len(plan),
            'dropped_fraction': keep_stats.mean_dropped,
            'retained_fraction': keep_stats.mean_retained,
        }

    def run(self) -> RunSummary:
        config = self.config
        started = time.perf_counter()
        logger.info(f"🚀 Starting {config.name}: {config.model.architecture} on {config.data.source}, "
                    f"regularizer {config.regularizer.describe()}, rate {config.protocol.participation_rate:g}")

        splits = self.build_data()
        model = self.build_model()
        self._prepare_output(splits)
        optimizer = SGD(list(model.named_parameters()), momentum=config.schedule.momentum)
        metrics = MetricsLog(self.output_dir / 'metrics.csv')
        step_log = StepLog(self.output_dir / 'steps.csv')

        best_acc, best_epoch, active_total, batches_total = -1.0, -1, 0, 0
        epoch_row: Dict[str, Any] = {}
        try:
            for epoch in range(config.schedule.epochs):
                lr = step_lr(epoch, config.schedule.base_lr, config.schedule.lr_milestones, config.schedule.lr_factor)
                stats = self.train_epoch(epoch, model, optimizer, splits, lr, step_log)
                _, test_acc = evaluate(model, splits.test)
                active_total += stats['active_batch_count']
                batches_total += stats['total_batches']

                epoch_row = {
                    'epoch': epoch, 'train_loss': stats['train_loss'], 'train_acc': stats['train_acc'],
                    'test_acc': test_acc, 'lr': lr, 'active_batch_count': stats['active_batch_count'],
                    'dropped_fraction': stats['dropped_fraction'], 'retained_fraction': stats['retained_fraction'],
                }
                metrics.append(**epoch_row)
                metrics.flush()
                step_log.flush()

                if test_acc > best_acc:
                    best_acc, best_epoch = test_acc, epoch
                    save_checkpoint(model, self.output_dir / 'best', self._checkpoint_extra(splits, epoch, test_acc))
                save_checkpoint(model, self.output_dir / 'last', self._checkpoint_extra(splits, epoch, test_acc))

                logger.info(
                    f"[{config.name}] epoch {epoch + 1}/{config.schedule.epochs} lr={lr:g} "
                    f"loss={stats['train_loss']:.4f} train_acc={stats['train_acc']:.4f} test_acc={test_acc:.4f} "
                    f"active={stats['active_batch_count']}/{stats['total_batches']} "
                    f"dropped={stats['dropped_fraction']:.3f}"
                )
        except FocusdropError as e:
            logger.error(f"❌ {config.name} failed: {e}")
            raise

        summary = RunSummary(
            name=config.name, output_dir=str(self.output_dir), epochs=config.schedule.epochs,
            best_test_acc=best_acc, best_epoch=best_epoch, final_test_acc=epoch_row['test_acc'],
            final_dropped_fraction=epoch_row['dropped_fraction'],
            final_retained_fraction=epoch_row['retained_fraction'],
            active_batches=active_total, total_batches=batches_total,
            parameter_count=model.parameter_count(),
            wall_time_s=time.perf_counter() - started,
            history=metrics.rows,
        )
        if config.expected is not None:
            measured = best_acc * 100.0
            summary.expected = {
                'test_acc': config.expected.test_acc, 'tolerance': config.expected.tolerance,
                'source': config.expected.source, 'measured': measured,
                'within_tolerance': config.expected.check(measured),
            }
        (self.output_dir / 'summary.json').write_text(json.dumps(summary.to_dict(), indent=2))
        logger.info(f"✅ {config.name} done: best test_acc {best_acc:.4f} at epoch {best_epoch + 1} "
                    f"({summary.wall_time_s:.1f}s)")
        return summary


def run_experiment(config: ExperimentConfig, output_root: Optional[Path] = None) -> RunSummary:
    return ExperimentRunner(config, output_root).run()


# =============================================================================
# Variants
# =============================================================================

def _variant(config: ExperimentConfig, suffix: str, **changes: Any) -> ExperimentConfig:
    variant = copy.deepcopy(config)
    for key, value in changes.items():
        setattr(variant, key, value)
    variant.name = f"{config.name}-{suffix}"
    if config.output_dir:
        variant.output_dir = str(Path(config.output_dir) / suffix)
    variant.validate()
    return variant


def randomly_mwd_mode(config: ExperimentConfig) -> ExperimentConfig:
    """Same batch plan, magnified weight decay on planned batches, no mask applied."""
    protocol = replace(config.protocol, randomly_mwd=True, mwd_enabled=True)
    return _variant(config, 'randomly-mwd', regularizer=RegularizerSpec(), protocol=protocol)


def ablation_variants(config: ExperimentConfig) -> Dict[str, ExperimentConfig]:
    """
    The ablation suite around ``config``'s FocusedDropout settings:
    baseline, randomly_mwd, focused / opposite with and without MWD.
    """
    base_reg = config.regularizer
    gamma = base_reg.gamma if base_reg.is_focused_family else GammaRange.moderate()
    points = base_reg.insertion_points if base_reg.is_focused_family else []

    def reg(kind: RegularizerKind) -> RegularizerSpec:
        return RegularizerSpec(kind=kind, gamma=gamma, insertion_points=list(points))

    no_mwd = replace(config.protocol, mwd_enabled=False, randomly_mwd=False)
    with_mwd = replace(config.protocol, mwd_enabled=True, randomly_mwd=False)
    return {
        'baseline': _variant(config, 'baseline', regularizer=RegularizerSpec(), protocol=no_mwd),
        'randomly_mwd': randomly_mwd_mode(config),
        'focused_without_mwd': _variant(config, 'focused-without-mwd', regularizer=reg(RegularizerKind.FOCUSED),
                                        protocol=no_mwd),
        'opposite_without_mwd': _variant(config, 'opposite-without-mwd',
                                         regularizer=reg(RegularizerKind.OPPOSITE), protocol=no_mwd),
        'opposite': _variant(config, 'opposite', regularizer=reg(RegularizerKind.OPPOSITE), protocol=with_mwd),
        'focused': _variant(config, 'focused', regularizer=reg(RegularizerKind.FOCUSED), protocol=with_mwd),
    }


SWEEP_PARAMS = ('participation_rate', 'gamma', 'mwd')


def sweep_configs(config: ExperimentConfig, param: str, values: Sequence[Any]) -> List[Tuple[Any, ExperimentConfig]]:
    """One config per value of ``param`` (participation_rate, gamma or mwd)."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"Cannot sweep '{param}'. Sweepable: {', '.join(SWEEP_PARAMS)}")
    configs = []
    base = config.to_dict()
    for value in values:
        label = str(value)
        data = apply_overrides(base, [f"{param}={value}"])
        data['name'] = f"{config.name}-{param}-{label.replace(':', '_')}"
        if config.output_dir:
            data['output_dir'] = str(Path(config.output_dir) / f"{param}-{label.replace(':', '_')}")
        configs.append((value, ExperimentConfig.from_dict(data)))
    return configs


def _summarise(log: SweepLog, param: str, value: Any, summary: RunSummary):
    log.append(param=param, value=value, best_test_acc=summary.best_test_acc,
               final_dropped_fraction=summary.final_dropped_fraction,
               final_retained_fraction=summary.final_retained_fraction, run_dir=summary.output_dir)


def run_sweep(config: ExperimentConfig, param: str, values: Sequence[Any],
              output_root: Optional[Path] = None) -> Tuple[Path, List[RunSummary]]:
    """Run every sweep point; writes ``<name>-sweep-<param>.csv`` next to the runs."""
    runs = sweep_configs(config, param, values)
    root = config.output_path(output_root).parent if not config.output_dir else Path(config.output_dir)
    log = SweepLog(root / f"{config.name}-sweep-{param}.csv")
    summaries = []
    for value, variant in runs:
        summary = run_experiment(variant, output_root)
        _summarise(log, param, value, summary)
        log.flush()
        summaries.append(summary)
    logger.info(f"Sweep over {param} finished: {log.path}")
    return log.path, summaries


def run_ablation(config: ExperimentConfig, output_root: Optional[Path] = None,
                 variants: Optional[Sequence[str]] = None) -> Tuple[Path, Dict[str, RunSummary]]:
    """Run the ablation suite (or the named subset); writes ``<name>-ablation.csv``."""
    suite = ablation_variants(config)
    if variants:
        unknown = set(variants) - set(suite)
        if unknown:
            raise ConfigError(f"Unknown ablation variants {sorted(unknown)}. Known: {', '.join(suite)}")
        suite = {k: v for k, v in suite.items() if k in variants}
    root = config.output_path(output_root).parent if not config.output_dir else Path(config.output_dir)
    log = SweepLog(root / f"{config.name}-ablation.csv")
    summaries = {}
    for name, variant in suite.items():
        summaries[name] = run_experiment(variant, output_root)
        _summarise(log, 'variant', name, summaries[name])
        log.flush()
    return log.path, summaries
