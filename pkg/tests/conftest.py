import numpy as np
import pytest
from hypothesis import settings

from confsep.data import LabeledDataset
from confsep.scores import ScoreModel
from confsep.synth import MixtureSpec, sample_dataset

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


class FirstCoordinateScore(ScoreModel):
    """Score equal to the first feature; lets tests dictate scores directly."""

    def candidate_scores(self, bag_X, bag_y, num_classes, X, y):
        return np.asarray(X, dtype=np.float64)[:, 0].copy()


def column(values, labels=None, num_classes=2):
    values = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    labels = np.zeros(len(values), dtype=np.int64) if labels is None else np.asarray(labels)
    return LabeledDataset(values, labels, num_classes)


@pytest.fixture
def small_spec():
    return MixtureSpec(num_classes=3, dim=4, separation=3.0)


@pytest.fixture
def small_data(small_spec):
    return sample_dataset(small_spec, 40, seed=7)
