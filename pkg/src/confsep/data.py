"""Labeled dataset container shared by every module."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Ordered sequence of (feature vector, label) pairs.

    Features are stored as an ``(n, d)`` float array and labels as an
    ``(n,)`` integer array with values in ``[0, num_classes)``. Duplicates
    are allowed; order is kept only so that positions can be referenced
    (poison manifests, permutation bookkeeping).
    """

    X: np.ndarray
    y: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=np.float64, copy=True)
        y = np.array(self.y, copy=True)
        if X.ndim != 2:
            raise ValueError(f"features must be a 2-d array, got shape {X.shape}")
        n, d = X.shape
        if n < 1:
            raise ValueError("dataset must contain at least one item")
        if d < 1:
            raise ValueError("feature dimension must be positive")
        if y.shape != (n,):
            raise ValueError(f"expected {n} labels, got shape {y.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite (no NaN/Inf)")
        if y.dtype.kind == "f":
            if not np.all(y == np.round(y)):
                raise ValueError("labels must be integers")
        elif y.dtype.kind not in "iu":
            raise ValueError(f"labels must be integers, got dtype {y.dtype}")
        y = y.astype(np.int64)
        if int(self.num_classes) < 2:
            raise ValueError("label alphabet needs at least 2 labels")
        if y.min() < 0 or y.max() >= self.num_classes:
            raise ValueError(
                f"labels must lie in [0, {self.num_classes}), "
                f"got range [{y.min()}, {y.max()}]"
            )
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "num_classes", int(self.num_classes))

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self) -> Iterator[tuple[np.ndarray, int]]:
        for i in range(len(self)):
            yield self.X[i], int(self.y[i])

    def __getitem__(self, i: int) -> tuple[np.ndarray, int]:
        return self.X[i], int(self.y[i])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def labels(self) -> range:
        return range(self.num_classes)

    def take(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.X[idx], self.y[idx], self.num_classes)

    def check_point(self, x, y: int | None = None) -> np.ndarray:
        """Validate a query point against this dataset and return it as an array."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(
                f"point has shape {x.shape}, dataset dimension is {self.dim}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("point must be finite")
        if y is not None and not (0 <= int(y) < self.num_classes):
            raise ValueError(f"unknown label {y}; alphabet is 0..{self.num_classes - 1}")
        return x

    def check_compatible(self, other: "LabeledDataset") -> None:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if self.num_classes != other.num_classes:
            raise ValueError(
                f"label alphabet mismatch: {self.num_classes} vs {other.num_classes} labels"
            )
