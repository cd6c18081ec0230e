"""
Analysis - keeping ratios, class activation maps, reference-channel histograms, export
"""

from .cam import CamMap, bilinear_upsample, cam, class_activation_map, normalize_map
from .export import (
    export_heatmap, quantize_heatmap, read_heatmap_csv, read_pgm, write_histogram_csv, write_mask_csv,
    write_mask_pgm, write_mask_records_csv, write_pgm,
)
from .keep_stats import KeepStats, keeping_ratio
from .refhist import RefChannelHistogram, reference_channel_histogram

__all__ = [
    'CamMap', 'cam', 'bilinear_upsample', 'normalize_map', 'class_activation_map',
    'KeepStats', 'keeping_ratio',
    'RefChannelHistogram', 'reference_channel_histogram',
    'export_heatmap', 'quantize_heatmap', 'read_heatmap_csv', 'read_pgm', 'write_pgm',
    'write_mask_pgm', 'write_mask_csv', 'write_mask_records_csv', 'write_histogram_csv',
]
