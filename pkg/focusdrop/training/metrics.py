"""
Metrics logs

metrics.csv   one row per epoch (schema below, version METRICS_SCHEMA_VERSION)
steps.csv     one row per optimizer step, for auditing the batch plan
Both contain only seed-determined values so identical runs write identical
files; wall-clock time goes to summary.json.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

logger = logging.getLogger(__name__)

METRICS_SCHEMA_VERSION = 1

METRICS_COLUMNS = [
    'epoch', 'train_loss', 'train_acc', 'test_acc', 'lr',
    'active_batch_count', 'dropped_fraction', 'retained_fraction',
]

STEP_COLUMNS = ['epoch', 'step', 'active', 'weight_decay', 'lr', 'loss']

SWEEP_COLUMNS = ['param', 'value', 'best_test_acc', 'final_dropped_fraction', 'final_retained_fraction', 'run_dir']


class CsvLog:
    """Row buffer with a fixed column order, rewritten in full on every flush"""

    columns: List[str] = []

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.rows: List[Dict[str, Any]] = []

    def append(self, **row: Any):
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise KeyError(f"{self.path.name}: row missing columns {missing}")
        self.rows.append({c: row[c] for c in self.columns})

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns)

    def flush(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.frame().to_csv(self.path, index=False)


class MetricsLog(CsvLog):
    columns = METRICS_COLUMNS


class StepLog(CsvLog):
    columns = STEP_COLUMNS


class SweepLog(CsvLog):
    columns = SWEEP_COLUMNS


def read_csv_log(path: Union[str, Path], columns: List[str] = METRICS_COLUMNS) -> pd.DataFrame:
    """Read a log written by CsvLog; the column set must match exactly."""
    frame = pd.read_csv(path)
    if list(frame.columns) != list(columns):
        raise ValueError(f"{path}: columns {list(frame.columns)} do not match expected {columns}")
    return frame
