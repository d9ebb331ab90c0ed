import numpy as np
import pytest

from confsep.data import LabeledDataset


def test_basic_shape_and_iteration():
    D = LabeledDataset([[0.0, 1.0], [2.0, 3.0]], [0, 1], 2)
    assert len(D) == 2 and D.dim == 2
    assert list(D.labels) == [0, 1]
    x, y = D[1]
    assert y == 1 and np.array_equal(x, [2.0, 3.0])
    assert [int(y) for _, y in D] == [0, 1]


def test_arrays_are_read_only_copies():
    X = np.zeros((2, 1))
    D = LabeledDataset(X, [0, 1], 2)
    X[0, 0] = 9.0
    assert D.X[0, 0] == 0.0
    with pytest.raises(ValueError):
        D.X[0, 0] = 1.0


@pytest.mark.parametrize(
    "X, y, K",
    [
        ([[np.nan]], [0], 2),
        ([[np.inf]], [0], 2),
        (np.zeros((0, 2)), np.zeros(0, dtype=int), 2),
        (np.zeros((2, 0)), [0, 1], 2),
        ([[0.0]], [2], 2),
        ([[0.0]], [-1], 2),
        ([[0.0]], [0], 1),
        ([[0.0]], [0.5], 2),
        ([0.0, 1.0], [0, 1], 2),
    ],
)
def test_invalid_inputs_rejected(X, y, K):
    with pytest.raises(ValueError):
        LabeledDataset(X, y, K)


def test_equality_is_itemwise():
    a = LabeledDataset([[1.0], [2.0]], [0, 1], 2)
    assert a == LabeledDataset([[1.0], [2.0]], [0, 1], 2)
    assert a != LabeledDataset([[2.0], [1.0]], [1, 0], 2)
    assert a != LabeledDataset([[1.0], [2.0]], [0, 1], 3)


def test_check_point_and_compatibility():
    D = LabeledDataset([[0.0, 0.0]], [0], 3)
    with pytest.raises(ValueError):
        D.check_point([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        D.check_point([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        D.check_compatible(LabeledDataset([[0.0]], [0], 3))
    with pytest.raises(ValueError):
        D.check_compatible(LabeledDataset([[0.0, 0.0]], [0], 2))


def test_take_preserves_alphabet():
    D = LabeledDataset([[0.0], [1.0], [2.0]], [0, 1, 0], 4)
    sub = D.take([2, 0])
    assert sub.num_classes == 4
    assert np.array_equal(sub.X[:, 0], [2.0, 0.0])
