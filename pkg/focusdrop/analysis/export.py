"""
File export for heatmaps, masks and histograms

PGM files are binary P5. Heatmaps are quantised to 8 bits with
round-half-even (``np.rint``) after min-max normalisation; the raw values
go to a CSV written at full precision so it reads back exactly.
"""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..regularizers import FocusMask
from .cam import CamMap, normalize_map
from .keep_stats import keeping_ratio
from .refhist import RefChannelHistogram

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# =============================================================================
# PGM
# =============================================================================

def write_pgm(pixels: np.ndarray, path: PathLike, maxval: int = 255):
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"PGM needs a 2-D array, got shape {pixels.shape}")
    if pixels.min(initial=0) < 0 or pixels.max(initial=0) > maxval:
        raise ValueError(f"PGM pixel values must be in [0, {maxval}]")
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode('ascii')
    Path(path).write_bytes(header + pixels.astype(np.uint8).tobytes())


def read_pgm(path: PathLike) -> Tuple[np.ndarray, int]:
    """(pixels uint8 (h, w), maxval) from a P5 file with 8-bit samples."""
    data = Path(path).read_bytes()
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b'#':
            pos = data.index(b'\n', pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b'P5':
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = (int(t) for t in tokens[1:])
    pixels = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    if pixels.size != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {pixels.size}")
    return pixels.reshape(h, w), maxval


# =============================================================================
# Heatmaps
# =============================================================================

def quantize_heatmap(values: np.ndarray) -> np.ndarray:
    """Min-max normalise then map to 0..255 with round-half-even."""
    normalized, _ = normalize_map(values)
    return np.rint(normalized * 255.0).astype(np.uint8)


def export_heatmap(heatmap: Union[CamMap, np.ndarray], path: PathLike) -> Tuple[Path, Path]:
    """
    Write ``<path>.pgm`` (8-bit) and ``<path>.csv`` (raw values)

    Returns:
        (pgm path, csv path)
    """
    values = heatmap.heatmap if isinstance(heatmap, CamMap) else np.asarray(heatmap, dtype=np.float64)
    base = Path(path)
    if base.suffix in ('.pgm', '.csv'):
        base = base.with_suffix('')
    base.parent.mkdir(parents=True, exist_ok=True)
    pgm_path, csv_path = base.with_suffix('.pgm'), base.with_suffix('.csv')
    write_pgm(quantize_heatmap(values), pgm_path)
    np.savetxt(csv_path, values, fmt='%.17g', delimiter=',')
    logger.debug(f"Exported heatmap {values.shape} to {pgm_path}")
    return pgm_path, csv_path


def read_heatmap_csv(path: PathLike) -> np.ndarray:
    return np.loadtxt(path, delimiter=',', dtype=np.float64, ndmin=2)


# =============================================================================
# Masks and histograms
# =============================================================================

def _bits(mask: Union[FocusMask, np.ndarray]) -> np.ndarray:
    return (mask.mask if isinstance(mask, FocusMask) else np.asarray(mask)).astype(np.uint8)


def write_mask_pgm(mask: Union[FocusMask, np.ndarray], path: PathLike):
    """Binary mask as P5 with maxval 1."""
    write_pgm(_bits(mask), path, maxval=1)


def write_mask_csv(mask: Union[FocusMask, np.ndarray], path: PathLike):
    np.savetxt(path, _bits(mask), fmt='%d', delimiter=',')


def write_mask_records_csv(records: Sequence[FocusMask], path: PathLike) -> pd.DataFrame:
    """One row per sample: which channel, γ, threshold and peak produced its mask."""
    rows = []
    for i, record in enumerate(records):
        dropped, _ = keeping_ratio(record)
        rows.append({'sample': i, **record.to_dict(), 'dropped_fraction': dropped})
    frame = pd.DataFrame(rows, columns=[
        'sample', 'ref_channel', 'gamma', 'threshold', 'peak_value', 'peak_row', 'peak_col',
        'degenerate', 'inverted', 'dropped_fraction',
    ])
    frame.to_csv(path, index=False)
    return frame


def write_histogram_csv(histogram: RefChannelHistogram, path: PathLike) -> pd.DataFrame:
    frame = histogram.to_frame()
    frame.to_csv(path, index=False)
    return frame
