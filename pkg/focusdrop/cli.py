#!/usr/bin/env python
"""
focusdrop command line

Usage:
    # Train one experiment
    python -m focusdrop train configs/tiny_focused.yaml

    # Evaluate a checkpoint on the test split of a dataset
    python -m focusdrop eval runs/tiny_focused/best synthetic

    # Participation-rate sweep
    python -m focusdrop sweep configs/tiny_focused.yaml --param participation_rate=0,0.05,0.1,0.2,0.3,0.4

    # CAM heatmap of test image 3 for class 1
    python -m focusdrop cam runs/tiny_focused/best test:3 1
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import settings
from .analysis import (
    KeepStats, cam, export_heatmap, reference_channel_histogram, write_histogram_csv, write_mask_csv,
    write_mask_pgm, write_mask_records_csv,
)
from .autograd import Tensor, load_tensor, no_grad
from .data import DataSpec, DataSplits, Normalization, load_splits
from .exceptions import ConfigError, FocusdropError
from .models import load_checkpoint
from .regularizers import FeatureStack, GammaRange, build_focus_mask, invert_mask, sample_gamma
from .random_streams import make_stream, sample_streams
from .training import evaluate, load_config, read_config_dict, run_ablation, run_experiment, run_sweep
from .training.runner import SWEEP_PARAMS, ablation_variants

logger = logging.getLogger(__name__)


# =============================================================================
# Helpers
# =============================================================================

def load_dataset_arg(value: str, manifest: dict) -> DataSplits:
    """
    Resolve a dataset argument against a checkpoint

    ``checkpoint`` reuses the data the model was trained on; a .yaml path uses
    that config's data section; otherwise DataSpec.parse forms
    (synthetic[:k=v,...], cifar10[:path], cifar100[:path]).
    Images are normalised with the checkpoint's stored constants.
    """
    extra = manifest.get('extra', {})
    if value == 'checkpoint':
        if 'data' not in extra:
            raise ConfigError("checkpoint manifest records no dataset; pass one explicitly")
        spec = DataSpec.from_dict(extra['data'])
    elif value.endswith(('.yaml', '.yml')):
        spec = DataSpec.from_dict(read_config_dict(value).get('data'))
    else:
        spec = DataSpec.parse(value)
    normalization = Normalization.from_dict(extra['normalization']) if 'normalization' in extra else None
    return load_splits(spec, normalization)


def load_image_arg(value: str, manifest: dict) -> Tuple[np.ndarray, Optional[int]]:
    """(normalised (C, H, W) image, label or None) from ``test:<i>``, ``train:<i>``, .fnt or .npy."""
    split, _, index = value.partition(':')
    if split in ('test', 'train') and index.isdigit():
        splits = load_dataset_arg('checkpoint', manifest)
        dataset = getattr(splits, split)
        i = int(index)
        if i >= len(dataset):
            raise ConfigError(f"{value}: split has only {len(dataset)} images")
        return dataset.images[i], int(dataset.labels[i])

    path = Path(value)
    if not path.exists():
        raise FileNotFoundError(f"Image file not found: {path}")
    raw = load_tensor(path) if path.suffix == '.fnt' else np.load(path)
    extra = manifest.get('extra', {})
    if 'normalization' in extra:
        raw = Normalization.from_dict(extra['normalization']).apply(raw[None])[0]
    return raw.astype(np.float32), None


def parse_param(text: str) -> Tuple[str, List[str]]:
    """``name=v1,v2,...`` for --param."""
    name, _, values = text.partition('=')
    if not values:
        raise ConfigError(f"--param must be name=v1,v2,..., got {text!r}")
    if name not in SWEEP_PARAMS:
        raise ConfigError(f"Cannot sweep '{name}'. Sweepable: {', '.join(SWEEP_PARAMS)}")
    return name, [v.strip() for v in values.split(',') if v.strip()]


# =============================================================================
# Commands
# =============================================================================

def cmd_train(args) -> int:
    config = load_config(args.config, args.set or [])
    summary = run_experiment(config, args.output_root)
    print(f"best test_acc {summary.best_test_acc:.4f} (epoch {summary.best_epoch + 1}) -> {summary.output_dir}")
    return 0


def cmd_eval(args) -> int:
    model, manifest = load_checkpoint(args.checkpoint)
    splits = load_dataset_arg(args.dataset, manifest)
    dataset = getattr(splits, args.split)
    loss, acc = evaluate(model, dataset, args.batch_size)
    print(f"{args.split}: loss {loss:.4f}, accuracy {acc:.4f} over {len(dataset)} images")
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config, args.set or [])
    param, values = parse_param(args.param)
    path, summaries = run_sweep(config, param, values, args.output_root)
    for value, summary in zip(values, summaries):
        print(f"{param}={value}: best test_acc {summary.best_test_acc:.4f}, "
              f"dropped {summary.final_dropped_fraction:.3f}")
    print(f"sweep summary -> {path}")
    return 0


def cmd_ablate(args) -> int:
    config = load_config(args.config, args.set or [])
    if args.list:
        for name, variant in ablation_variants(config).items():
            print(f"{name:22s} {variant.regularizer.describe()}  mwd={variant.magnify_weight_decay}")
        return 0
    path, summaries = run_ablation(config, args.output_root, args.variants)
    for name, summary in summaries.items():
        print(f"{name:22s} best test_acc {summary.best_test_acc:.4f}")
    print(f"ablation summary -> {path}")
    return 0


def cmd_cam(args) -> int:
    model, manifest = load_checkpoint(args.checkpoint)
    image, label = load_image_arg(args.image, manifest)
    heatmap = cam(model, image, args.class_index)
    out = Path(args.out) if args.out else settings.OUTPUT_ROOT / 'cam' / f"{Path(args.checkpoint).name}-class{args.class_index}"
    pgm_path, csv_path = export_heatmap(heatmap, out)
    label_text = f" (true label {label})" if label is not None else ''
    print(f"CAM for class {args.class_index}{label_text}: {pgm_path}, {csv_path}")
    return 0


def cmd_refhist(args) -> int:
    model, manifest = load_checkpoint(args.checkpoint)
    dataset = getattr(load_dataset_arg(args.dataset, manifest), args.split)
    histogram = reference_channel_histogram(model, dataset)
    out = Path(args.out) if args.out else settings.OUTPUT_ROOT / f"{Path(args.checkpoint).name}-refhist.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_histogram_csv(histogram, out)
    for k in range(histogram.num_classes):
        print(f"class {k}: {histogram.correct_per_class[k]} correct, top channel {histogram.top_channel(k)} "
              f"({histogram.top_share(k):.0%})")
    print(f"histogram -> {out}")
    return 0


def cmd_masks(args) -> int:
    """FocusedDropout masks at the penultimate stage for the first --count test images."""
    model, manifest = load_checkpoint(args.checkpoint)
    dataset = getattr(load_dataset_arg(args.dataset, manifest), args.split)
    gamma_range = GammaRange.parse(args.gamma)
    count = min(args.count, len(dataset))
    out = Path(args.out) if args.out else settings.OUTPUT_ROOT / f"{Path(args.checkpoint).name}-masks"
    out.mkdir(parents=True, exist_ok=True)

    model.eval()
    with no_grad():
        features = model.stage_outputs(Tensor(dataset.images[:count]))[args.stage or model.penultimate_stage].data
    streams = sample_streams(make_stream(args.seed, 'reg'), count)
    records, stats = [], KeepStats()
    for i in range(count):
        focus = build_focus_mask(FeatureStack.from_batch(features, i), sample_gamma(gamma_range, streams[i]))
        if args.opposite:
            focus = invert_mask(focus)
        write_mask_pgm(focus, out / f"mask_{i:04d}.pgm")
        write_mask_csv(focus, out / f"mask_{i:04d}.csv")
        records.append(focus)
        stats.add(focus)
    write_mask_records_csv(records, out / 'masks.csv')
    print(f"{count} masks -> {out} (mean dropped {stats.mean_dropped:.3f}, retained {stats.mean_retained:.3f})")
    return 0


# =============================================================================
# Parser
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='focusdrop',
        description='FocusedDropout experiments on a numpy autograd core',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
Examples:
  # Desk-scale run
  %(prog)s train configs/tiny_focused.yaml

  # Override config values
  %(prog)s train configs/tiny_focused.yaml --set participation_rate=0.2 --set gamma=0.6:0.9

  # Gamma and magnified weight decay sweeps
  %(prog)s sweep configs/tiny_focused.yaml --param gamma=0.3,0.6,0.9,0.3:0.6
  %(prog)s sweep configs/tiny_focused.yaml --param mwd=0.0005,0.001,0.002

  # Ablation suite (baseline, randomly MWD, focused/opposite with and without MWD)
  %(prog)s ablate configs/tiny_focused.yaml

  # Analysis on a trained checkpoint
  %(prog)s refhist runs/tiny_baseline/best checkpoint
  %(prog)s masks runs/tiny_focused/best checkpoint --count 16
        ''')
    parser.add_argument('--log-level', default=None, help=f'Logging level (default {settings.LOG_LEVEL})')
    sub = parser.add_subparsers(dest='command', required=True)

    def with_config(p):
        p.add_argument('config', help='Experiment YAML file')
        p.add_argument('--set', action='append', metavar='KEY=VALUE', help='Override a config value (repeatable)')
        p.add_argument('--output-root', type=Path, default=None, help=f'Run directory root (default {settings.OUTPUT_ROOT})')

    p = sub.add_parser('train', help='Train one experiment')
    with_config(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', help='Evaluate a checkpoint')
    p.add_argument('checkpoint', help='Checkpoint path (without .fnt / .manifest.json)')
    p.add_argument('dataset', help='checkpoint, a config .yaml, synthetic[:k=v,...], cifar10[:path] or cifar100[:path]')
    p.add_argument('--split', choices=['train', 'test'], default='test')
    p.add_argument('--batch-size', type=int, default=256)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('sweep', help='Sweep participation_rate, gamma or mwd')
    with_config(p)
    p.add_argument('--param', required=True, metavar='NAME=V1,V2,...', help='Parameter and values to sweep')
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('ablate', help='Run the ablation suite')
    with_config(p)
    p.add_argument('--variants', nargs='+', default=None, help='Subset of variants to run')
    p.add_argument('--list', action='store_true', help='List the variants without running them')
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser('cam', help='Class activation map of one image')
    p.add_argument('checkpoint')
    p.add_argument('image', help='test:<index>, train:<index>, or a (C,H,W) .fnt / .npy file of [0,1] pixels')
    p.add_argument('class_index', type=int, metavar='class')
    p.add_argument('--out', default=None, help='Output path without suffix')
    p.set_defaults(func=cmd_cam)

    p = sub.add_parser('refhist', help='Reference-channel histogram over a dataset')
    p.add_argument('checkpoint')
    p.add_argument('dataset')
    p.add_argument('--split', choices=['train', 'test'], default='test')
    p.add_argument('--out', default=None, help='CSV path')
    p.set_defaults(func=cmd_refhist)

    p = sub.add_parser('masks', help='Export FocusedDropout masks for inspection')
    p.add_argument('checkpoint')
    p.add_argument('dataset')
    p.add_argument('--split', choices=['train', 'test'], default='test')
    p.add_argument('--count', type=int, default=8)
    p.add_argument('--gamma', default='0.3:0.6', help='Fixed value or lo:hi range')
    p.add_argument('--stage', default=None, help='Stage output to mask (default penultimate)')
    p.add_argument('--opposite', action='store_true', help='Export the inverted (Opposite) masks')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', default=None, help='Output directory')
    p.set_defaults(func=cmd_masks)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings.configure_logging(args.log_level)
    try:
        return args.func(args)
    except (FocusdropError, OSError) as e:
        logger.error(f"❌ {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
