"""Conformal p-values, expiry vectors and prediction sets.

The p-value of a candidate ``(x, y)`` given a dataset ``D`` of width ``n``
is computed over the augmented bag ``b = D ++ [(x, y)]``::

    p = #{i in 1..n+1 : A(b, b_i) >= A(b, (x, y))} / (n + 1)

The candidate itself is part of the count, so ``p >= 1/(n+1)``. Ties are
resolved by ``>=`` with no randomization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .data import LabeledDataset
from .scores import ScoreModel


@dataclass(frozen=True)
class PredictionSet:
    """Labels whose p-value strictly exceeds ``epsilon``. May be empty."""

    labels: frozenset
    epsilon: float

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.labels))

    def __len__(self) -> int:
        return len(self.labels)


def _check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    return epsilon


def _augmented_scores(D: LabeledDataset, score: ScoreModel, x: np.ndarray, y: int) -> np.ndarray:
    X_b = np.vstack([D.X, x[None, :]])
    y_b = np.append(D.y, np.int64(y))
    return score.candidate_scores(X_b, y_b, D.num_classes, X_b, y_b)


def p_value_count(D: LabeledDataset, score: ScoreModel, x, y: int) -> int:
    """Numerator ``k`` of the p-value ``k / (n + 1)``."""
    x = D.check_point(x, y)
    s = _augmented_scores(D, score, x, int(y))
    return int(np.count_nonzero(s >= s[-1]))


def p_value(D: LabeledDataset, score: ScoreModel, x, y: int) -> float:
    return p_value_count(D, score, x, y) / (len(D) + 1)


def expiry_details(D: LabeledDataset, score: ScoreModel, x) -> tuple[np.ndarray, np.ndarray]:
    """P-values and candidate scores for every label at ``x``, both shape ``(K,)``."""
    x = D.check_point(x)
    K = D.num_classes
    pvals = np.empty(K)
    cand = np.empty(K)
    for label in range(K):
        s = _augmented_scores(D, score, x, label)
        pvals[label] = np.count_nonzero(s >= s[-1]) / (len(D) + 1)
        cand[label] = s[-1]
    return pvals, cand


def expiry(D: LabeledDataset, score: ScoreModel, x) -> np.ndarray:
    """Map label -> p-value at ``x`` as a length-``K`` array."""
    return expiry_details(D, score, x)[0]


def expiry_batch_details(D: LabeledDataset, score: ScoreModel, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`expiry_details` for query points ``Xq``, shape ``(m, K)`` each.

    Bag-independent scores take a fast path: calibration scores are
    computed once and each query p-value is a binary search.
    """
    Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
    if Xq.shape[1] != D.dim:
        raise ValueError(f"query dimension {Xq.shape[1]} != dataset dimension {D.dim}")
    m, K, n = Xq.shape[0], D.num_classes, len(D)
    if not score.bag_independent:
        pvals = np.empty((m, K))
        cand = np.empty((m, K))
        for j in range(m):
            pvals[j], cand[j] = expiry_details(D, score, Xq[j])
        return pvals, cand
    if not np.all(np.isfinite(Xq)):
        raise ValueError("query points must be finite")
    calib = np.sort(score.candidate_scores(D.X, D.y, K, D.X, D.y))
    pvals = np.empty((m, K))
    cand = np.empty((m, K))
    for label in range(K):
        s = score.candidate_scores(D.X, D.y, K, Xq, np.full(m, label, dtype=np.int64))
        # calibration items with score >= s, plus the candidate itself
        count = n - np.searchsorted(calib, s, side="left") + 1
        pvals[:, label] = count / (n + 1)
        cand[:, label] = s
    return pvals, cand


def expiry_batch(D: LabeledDataset, score: ScoreModel, Xq) -> np.ndarray:
    return expiry_batch_details(D, score, Xq)[0]


def prediction_set_from_expiry(tau, epsilon: float) -> PredictionSet:
    epsilon = _check_epsilon(epsilon)
    tau = np.asarray(tau)
    return PredictionSet(frozenset(int(c) for c in np.flatnonzero(tau > epsilon)), epsilon)


def prediction_set(D: LabeledDataset, score: ScoreModel, x, epsilon: float) -> PredictionSet:
    _check_epsilon(epsilon)
    return prediction_set_from_expiry(expiry(D, score, x), epsilon)


def classify_from_expiry(tau, candidate_scores=None) -> int:
    """Label with the largest p-value.

    Ties go to the label whose candidate score is smallest, then to the
    lowest label id. Far outside the data every label sits at the floor
    ``1/(n+1)``, and without the score key the lowest id would win
    regardless of where ``x`` lies.
    """
    tau = np.asarray(tau)
    tied = np.flatnonzero(tau == tau.max())
    if candidate_scores is not None and len(tied) > 1:
        cs = np.asarray(candidate_scores)[tied]
        tied = tied[cs == cs.min()]
    return int(tied[0])


def conformal_classify(D: LabeledDataset, score: ScoreModel, x) -> int:
    return classify_from_expiry(*expiry_details(D, score, x))


def classify_batch(D: LabeledDataset, score: ScoreModel, Xq) -> np.ndarray:
    pvals, cand = expiry_batch_details(D, score, Xq)
    return np.array([classify_from_expiry(p, c) for p, c in zip(pvals, cand)], dtype=np.int64)
