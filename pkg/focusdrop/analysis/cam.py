"""
Class activation mapping

heatmap(x, y) = sum_c w[class, c] * f_c(x, y) over the last conv feature
maps f, using the classifier weights behind global average pooling. The
classifier bias never enters the map. The map is bilinearly upsampled to
the input size and min-max normalised; a constant map normalises to zeros.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..autograd import Tensor, no_grad
from ..exceptions import ModelSpecError, ShapeError
from ..models import GlobalAvgPool2d, Linear


@dataclass
class CamMap:
    """Normalised heatmap at input resolution plus the range it was scaled from"""
    heatmap: np.ndarray
    class_index: int
    value_range: Tuple[float, float]
    feature_map: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.heatmap.shape


def bilinear_upsample(values: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Resize a 2-D map to ``size`` with half-pixel centres and edge clamping."""
    values = np.asarray(values, dtype=np.float64)
    in_h, in_w = values.shape
    out_h, out_w = size

    def coords(out_n: int, in_n: int):
        src = (np.arange(out_n) + 0.5) * (in_n / out_n) - 0.5
        src = np.clip(src, 0.0, in_n - 1)
        low = np.floor(src).astype(int)
        high = np.minimum(low + 1, in_n - 1)
        return low, high, src - low

    r0, r1, fr = coords(out_h, in_h)
    c0, c1, fc = coords(out_w, in_w)
    top = values[r0][:, c0] * (1 - fc) + values[r0][:, c1] * fc
    bottom = values[r1][:, c0] * (1 - fc) + values[r1][:, c1] * fc
    return top * (1 - fr)[:, None] + bottom * fr[:, None]


def normalize_map(values: np.ndarray) -> Tuple[np.ndarray, Tuple[float, float]]:
    """Min-max scale to [0, 1]; max == min gives all zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros_like(values), (lo, hi)
    return (values - lo) / (hi - lo), (lo, hi)


def class_activation_map(features: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sum_c weights[c] * features[c] for features (C, h, w)."""
    if features.ndim != 3 or weights.shape != (features.shape[0],):
        raise ShapeError(f"features {features.shape} do not match class weights {weights.shape}")
    return np.tensordot(weights.astype(np.float64), features.astype(np.float64), axes=1)


def check_cam_head(model):
    if not isinstance(getattr(model, 'pool', None), GlobalAvgPool2d) or \
            not isinstance(getattr(model, 'classifier', None), Linear):
        raise ModelSpecError(f"CAM needs a global-average-pool + linear head; {type(model).__name__} has none")


def cam(model, image: np.ndarray, class_index: int) -> CamMap:
    """
    CAM heatmap of ``image`` (C, H, W) for ``class_index``

    Raises:
        ModelSpecError: the model does not end in GAP + linear
    """
    check_cam_head(model)
    num_classes = model.classifier.weight.shape[0]
    if not 0 <= class_index < num_classes:
        raise ValueError(f"class_index must be in [0, {num_classes}), got {class_index}")
    image = np.asarray(image)
    if image.ndim != 3:
        raise ShapeError(f"cam expects one (C, H, W) image, got {image.shape}")

    model.eval()
    with no_grad():
        features = model.forward_features(Tensor(image[None])).data[0]
    raw = class_activation_map(features, model.classifier.weight.data[class_index])
    heatmap, value_range = normalize_map(bilinear_upsample(raw, image.shape[1:]))
    return CamMap(heatmap=heatmap, class_index=class_index, value_range=value_range, feature_map=raw)
