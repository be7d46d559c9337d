import numpy as np
import pytest

from fedwatch import config as fwconfig
from fedwatch.data import Dataset


def small_config(**overrides):
    """Blob config small enough for unit tests (4 classes, 4 workers)."""
    base = {
        "dataset.classes": "4",
        "dataset.dim": "8",
        "dataset.per_class": "60",
        "dataset.validation": "60",
        "dataset.test": "60",
        "workers.count": "4",
        "attack.compromised": "0,1",
        "rounds": "6",
    }
    base.update({k: str(v) for k, v in overrides.items()})
    return fwconfig.parse_config(None, base)


@pytest.fixture
def tiny_dataset():
    rng = np.random.default_rng(1)
    features = rng.normal(0, 1, (30, 5))
    labels = rng.integers(0, 3, 30).astype(np.int64)
    return Dataset(features, labels, 3)
