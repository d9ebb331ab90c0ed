"""Non-conformity scores.

A score model maps a bag of labeled items and a candidate ``(x, y)`` to a
real number, larger meaning less conformal. Every model here implements
one vectorized primitive, :meth:`ScoreModel.candidate_scores`, which
scores a batch of candidates against a fixed bag. The conformal p-value
needs ``A(b, b_i)`` for every item of the augmented bag ``b``, which is
``candidate_scores(b, b)``.

Centroids are summed in a canonical (lexicographic) item order so that
bag-permutation invariance holds bit-for-bit rather than up to rounding.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax, xlogy

from .data import LabeledDataset

PROB_CLAMP = 1e-12
DEFAULT_BETA = 4.0


def _canonical_order(X: np.ndarray) -> np.ndarray:
    order = np.argsort(X[:, 0], kind="stable")
    keys = X[order, 0]
    if np.any(keys[1:] == keys[:-1]):
        # first coordinate ties: fall back to a full lexicographic key
        order = np.lexsort(X.T[::-1])
    return order


def label_centroids(X: np.ndarray, y: np.ndarray, num_classes: int) -> np.ndarray:
    """Per-label centroids, shape ``(num_classes, d)``; NaN rows for absent labels."""
    order = _canonical_order(X)
    Xs, ys = X[order], y[order]
    centroids = np.full((num_classes, X.shape[1]), np.nan)
    for c in range(num_classes):
        members = Xs[ys == c]
        if len(members):
            centroids[c] = members.sum(axis=0) / len(members)
    return centroids


def _distances_to_centroids(centroids: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    target = centroids[y]
    out = np.sqrt(((X - target) ** 2).sum(axis=1))
    # absent label: maximal non-conformity
    out[np.isnan(target[:, 0])] = np.inf
    return out


class ScoreModel(ABC):
    """Non-conformity score, symmetric in the bag argument."""

    #: True when the score ignores the bag (inductive scores); enables the
    #: sorted-calibration fast path in :func:`confsep.core.expiry_batch`.
    bag_independent = False

    @abstractmethod
    def candidate_scores(
        self,
        bag_X: np.ndarray,
        bag_y: np.ndarray,
        num_classes: int,
        X: np.ndarray,
        y: np.ndarray,
    ) -> np.ndarray:
        """Scores of candidates ``(X[j], y[j])`` against the bag, shape ``(m,)``."""

    def score(self, bag: LabeledDataset, x, y: int) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return float(
            self.candidate_scores(bag.X, bag.y, bag.num_classes, x, np.array([int(y)]))[0]
        )

    def bag_scores(self, bag: LabeledDataset) -> np.ndarray:
        """``A(bag, bag_i)`` for every item of the bag."""
        return self.candidate_scores(bag.X, bag.y, bag.num_classes, bag.X, bag.y)


class CentroidScore(ScoreModel):
    """Euclidean distance from ``x`` to the centroid of the bag items labeled ``y``."""

    def candidate_scores(self, bag_X, bag_y, num_classes, X, y):
        centroids = label_centroids(bag_X, bag_y, num_classes)
        return _distances_to_centroids(centroids, X, y)

    def __repr__(self) -> str:
        return "CentroidScore()"


class InductiveScore(ScoreModel):
    """Evaluates ``base`` against a frozen bag and discards the bag it is given."""

    bag_independent = True

    def __init__(self, base: ScoreModel, frozen: LabeledDataset):
        if len(frozen) < 1:
            raise ValueError("frozen bag must be nonempty")
        self.base = base
        self.frozen = frozen

    def candidate_scores(self, bag_X, bag_y, num_classes, X, y):
        f = self.frozen
        return self.base.candidate_scores(f.X, f.y, f.num_classes, X, y)

    def __repr__(self) -> str:
        return f"InductiveScore({self.base!r}, frozen n={len(self.frozen)})"


@dataclass(frozen=True)
class SoftmaxCentroidClassifier:
    """Temperature softmax over negative centroid distances."""

    centroids: np.ndarray
    beta: float = DEFAULT_BETA

    @property
    def num_classes(self) -> int:
        return self.centroids.shape[0]

    def logits(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        diff = X[:, None, :] - self.centroids[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        # NaN distance means the label had no training items
        return np.where(np.isnan(dist), -np.inf, -self.beta * dist)

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.logits(X), axis=1)


def fit_softmax_centroid(D: LabeledDataset, beta: float = DEFAULT_BETA) -> SoftmaxCentroidClassifier:
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    counts = np.bincount(D.y, minlength=D.num_classes)
    missing = [c for c in range(D.num_classes) if counts[c] == 0]
    if missing:
        raise ValueError(f"cannot fit classifier: label {missing[0]} has no items")
    return SoftmaxCentroidClassifier(label_centroids(D.X, D.y, D.num_classes), float(beta))


def entropy_relative_from_probs(probs, y) -> np.ndarray | float:
    """Entropy of ``probs`` relative to the self-information of label ``y``.

    ``-H(s) / (s_y ln s_y)`` with natural logs. ``s_y`` is clamped to
    ``[1e-12, 1 - 1e-12]`` so the denominator never vanishes.
    """
    P = np.asarray(probs, dtype=np.float64)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    y = np.broadcast_to(np.asarray(y, dtype=np.int64), (P.shape[0],))
    entropy = -xlogy(P, P).sum(axis=1)
    s = np.clip(P[np.arange(P.shape[0]), y], PROB_CLAMP, 1.0 - PROB_CLAMP)
    out = -entropy / (s * np.log(s))
    return float(out[0]) if single else out


def entropy_relative_score(classifier: SoftmaxCentroidClassifier, candidate) -> float:
    x, y = candidate
    return entropy_relative_from_probs(classifier.predict_proba(x)[0], int(y))


class EntropyRelativeScore(ScoreModel):
    """Entropy-relative score over a softmax-centroid classifier fit on the bag."""

    def __init__(self, beta: float = DEFAULT_BETA):
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.beta = float(beta)

    def candidate_scores(self, bag_X, bag_y, num_classes, X, y):
        clf = SoftmaxCentroidClassifier(label_centroids(bag_X, bag_y, num_classes), self.beta)
        return entropy_relative_from_probs(clf.predict_proba(X), y)

    def __repr__(self) -> str:
        return f"EntropyRelativeScore(beta={self.beta})"


def centroid_score(bag: LabeledDataset, candidate) -> float:
    x, y = candidate
    return CentroidScore().score(bag, x, y)


def inductive_wrap(base: ScoreModel, frozen: LabeledDataset) -> InductiveScore:
    return InductiveScore(base, frozen)


SCORE_KINDS = ("centroid", "inductive", "entropy")


def make_score(kind: str, frozen: LabeledDataset | None = None, beta: float = DEFAULT_BETA) -> ScoreModel:
    """Build a score model by name; ``inductive`` wraps the centroid score around ``frozen``."""
    if kind == "centroid":
        return CentroidScore()
    if kind == "entropy":
        return EntropyRelativeScore(beta)
    if kind == "inductive":
        if frozen is None:
            raise ValueError("inductive score needs a frozen bag")
        return InductiveScore(CentroidScore(), frozen)
    raise ValueError(f"unknown score kind {kind!r}; expected one of {SCORE_KINDS}")
