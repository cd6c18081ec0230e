"""
Model checkpoints

``<name>.fnt`` holds the parameters and buffers as FNT1 snapshots written
back to back; ``<name>.manifest.json`` lists their names and shapes in the
same order plus the model spec and any extra metadata (dataset
normalisation, experiment config, epoch, accuracy).
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ..autograd import read_snapshots, write_snapshots
from ..exceptions import SnapshotFormatError
from .architectures import ModelSpec, StagedNetwork, build_model

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


def checkpoint_paths(path: Union[str, Path]) -> Tuple[Path, Path]:
    """(snapshot file, manifest file) for a checkpoint path with or without suffix."""
    path = Path(path)
    if path.name.endswith('.manifest.json'):
        base = path.with_name(path.name[:-len('.manifest.json')])
    elif path.suffix == '.fnt':
        base = path.with_suffix('')
    else:
        base = path
    return base.with_name(base.name + '.fnt'), base.with_name(base.name + '.manifest.json')


def save_checkpoint(model: StagedNetwork, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None) -> Path:
    """Write ``model`` to ``path``.fnt / ``path``.manifest.json; returns the manifest path."""
    snapshot_path, manifest_path = checkpoint_paths(path)
    snapshot_path.parent.mkdir(parents=True, exist_ok=True)

    state = model.state_dict()
    shapes = write_snapshots(state.values(), snapshot_path)
    manifest = {
        'version': MANIFEST_VERSION,
        'model': model.spec.to_dict(),
        'tensors': [{'name': name, 'shape': list(shape)} for name, shape in zip(state, shapes)],
        'extra': extra or {},
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=False))
    logger.debug(f"Saved checkpoint {snapshot_path} ({len(state)} tensors)")
    return manifest_path


def load_checkpoint(path: Union[str, Path]) -> Tuple[StagedNetwork, Dict[str, Any]]:
    """
    Rebuild the model a checkpoint was saved from

    Returns:
        (model in eval mode, manifest dict)

    Raises:
        FileNotFoundError: either file missing
        SnapshotFormatError: tensor count or shapes disagree with the manifest
    """
    snapshot_path, manifest_path = checkpoint_paths(path)
    for p in (snapshot_path, manifest_path):
        if not p.exists():
            raise FileNotFoundError(f"Checkpoint file not found: {p}")

    manifest = json.loads(manifest_path.read_text())
    arrays = read_snapshots(snapshot_path)
    entries = manifest.get('tensors', [])
    if len(arrays) != len(entries):
        raise SnapshotFormatError(
            f"{snapshot_path}: manifest lists {len(entries)} tensors, file holds {len(arrays)}"
        )
    state = {}
    for entry, array in zip(entries, arrays):
        if list(array.shape) != list(entry['shape']):
            raise SnapshotFormatError(f"{entry['name']}: manifest shape {entry['shape']} vs stored {list(array.shape)}")
        state[entry['name']] = array

    spec = ModelSpec.from_dict(manifest['model'])
    # init values are overwritten below
    model = build_model(spec, np.random.default_rng(0))
    model.load_state_dict(state)
    model.eval()
    return model, manifest
