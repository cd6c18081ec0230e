"""
Shared fixtures
"""

import numpy as np
import pytest

from focusdrop.autograd import precision
from focusdrop.data import AugmentPolicy, DataSpec
from focusdrop.models import ModelSpec
from focusdrop.regularizers import RegularizerKind, RegularizerSpec
from focusdrop.training import ExperimentConfig, Protocol, Schedule, SeedConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def f64():
    """Run the test body with 64-bit tensors."""
    with precision('float64'):
        yield


def make_config(tmp_path, name='run', kind=RegularizerKind.NONE, rate=0.1, epochs=2, n_per_class=20,
                image_size=8, batch_size=16, **protocol):
    """Seconds-scale experiment on 8x8 synthetic patterns."""
    return ExperimentConfig(
        name=name,
        model=ModelSpec(architecture='tiny-cnn', num_classes=3),
        data=DataSpec(source='synthetic', classes=3, n_per_class=n_per_class, test_per_class=10,
                      image_size=image_size, seed=7),
        regularizer=RegularizerSpec(kind=kind),
        schedule=Schedule(epochs=epochs, batch_size=batch_size, base_lr=0.05),
        protocol=Protocol(participation_rate=rate, **protocol),
        seeds=SeedConfig(data=1, init=2, reg=3),
        augment=AugmentPolicy.none(),
        output_dir=str(tmp_path / name),
    )


@pytest.fixture
def tiny_config(tmp_path):
    def factory(**kwargs):
        return make_config(tmp_path, **kwargs)
    return factory
