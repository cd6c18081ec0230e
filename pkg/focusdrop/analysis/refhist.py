"""
Reference-channel histogram

For every correctly classified image, the last conv layer's channel with
the highest mean activation is counted under the image's class.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..autograd import Tensor, no_grad
from ..data import Dataset, iterate_batches
from .cam import check_cam_head

logger = logging.getLogger(__name__)


@dataclass
class RefChannelHistogram:
    """counts[class, channel]; each row sums to that class's correct count"""
    counts: np.ndarray
    correct_per_class: np.ndarray
    total_per_class: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def num_channels(self) -> int:
        return self.counts.shape[1]

    def top_channel(self, class_index: int) -> int:
        return int(np.argmax(self.counts[class_index]))

    def top_share(self, class_index: int) -> float:
        """Share of the class's correct images won by its most frequent channel."""
        correct = self.correct_per_class[class_index]
        return float(self.counts[class_index].max() / correct) if correct else 0.0

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.counts, columns=[f"ch_{c}" for c in range(self.num_channels)])
        frame.insert(0, 'class', np.arange(self.num_classes))
        frame.insert(1, 'correct', self.correct_per_class)
        frame.insert(2, 'top_channel', [self.top_channel(k) for k in range(self.num_classes)])
        frame.insert(3, 'top_share', [self.top_share(k) for k in range(self.num_classes)])
        return frame


def reference_channel_histogram(model, dataset: Dataset, batch_size: int = 256) -> RefChannelHistogram:
    """Histogram of reference channels over ``dataset`` in evaluation mode."""
    check_cam_head(model)
    model.eval()
    counts = None
    correct_per_class = np.zeros(dataset.num_classes, dtype=np.int64)

    with no_grad():
        for images, labels in iterate_batches(dataset, batch_size, shuffle=False):
            features = model.forward_features(Tensor(images))
            predictions = model.classifier(model.pool(features)).data.argmax(axis=1)
            f = features.data
            means = f.sum(axis=(2, 3)) / (f.shape[2] * f.shape[3])
            # lowest channel index on ties
            reference = means.argmax(axis=1)
            if counts is None:
                counts = np.zeros((dataset.num_classes, f.shape[1]), dtype=np.int64)
            correct = predictions == labels
            np.add.at(counts, (labels[correct], reference[correct]), 1)
            np.add.at(correct_per_class, labels[correct], 1)

    histogram = RefChannelHistogram(
        counts=counts if counts is not None else np.zeros((dataset.num_classes, 0), dtype=np.int64),
        correct_per_class=correct_per_class,
        total_per_class=dataset.class_counts(),
    )
    logger.info(f"Reference-channel histogram over {int(correct_per_class.sum())}/{len(dataset)} correct images")
    return histogram
