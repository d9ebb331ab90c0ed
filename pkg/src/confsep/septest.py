"""Conformal Separability Test and empirical-CDF utilities.

For two datasets and a test input, ``p_cap`` is the largest level at
which some label survives in both prediction sets::

    p_cap = max_y min(p_1(x, y), p_2(x, y))

Because prediction sets keep labels with ``p > eps``, the two sets at
level ``eps`` intersect exactly when ``p_cap > eps``. A test input is
flagged (positive) when ``p_cap <= eps``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import _check_epsilon, expiry, expiry_batch
from .data import LabeledDataset
from .scores import ScoreModel


@dataclass(frozen=True)
class SeparabilityScore:
    p_cap: float
    p1: np.ndarray
    p2: np.ndarray

    @property
    def per_label(self) -> dict[int, tuple[float, float]]:
        return {y: (float(a), float(b)) for y, (a, b) in enumerate(zip(self.p1, self.p2))}


def p_cap_from_expiries(tau1, tau2) -> np.ndarray | float:
    """Row-wise ``max_y min(tau1[y], tau2[y])``."""
    tau1, tau2 = np.asarray(tau1, dtype=np.float64), np.asarray(tau2, dtype=np.float64)
    if tau1.shape != tau2.shape:
        raise ValueError(f"expiry shapes differ: {tau1.shape} vs {tau2.shape}")
    out = np.minimum(tau1, tau2).max(axis=-1)
    return float(out) if out.ndim == 0 else out


def separability_test(D1: LabeledDataset, D2: LabeledDataset, score: ScoreModel, x) -> SeparabilityScore:
    D1.check_compatible(D2)
    p1 = expiry(D1, score, x)
    p2 = expiry(D2, score, x)
    # label loop as written: start at 0, raise to min(p1, p2) per label
    p_cap = 0.0
    for y in range(D1.num_classes):
        p_cap = max(p_cap, min(p1[y], p2[y]))
    return SeparabilityScore(float(p_cap), p1, p2)


def separability_batch(D1: LabeledDataset, D2: LabeledDataset, score: ScoreModel, Xq) -> np.ndarray:
    """``p_cap`` for every row of ``Xq``."""
    D1.check_compatible(D2)
    return p_cap_from_expiries(expiry_batch(D1, score, Xq), expiry_batch(D2, score, Xq))


def is_positive(p_cap, epsilon: float):
    """Empty intersection at level ``epsilon``: ``p_cap <= epsilon``."""
    return np.asarray(p_cap) <= _check_epsilon(epsilon)


def detect(D1: LabeledDataset, D2: LabeledDataset, score: ScoreModel, x, epsilon: float) -> bool:
    _check_epsilon(epsilon)
    return bool(is_positive(separability_test(D1, D2, score, x).p_cap, epsilon))


class EmpiricalCdf:
    """Right-continuous empirical CDF ``F(t) = #{samples <= t} / n``."""

    def __init__(self, samples: Iterable[float]):
        if not isinstance(samples, np.ndarray):
            samples = np.fromiter(samples, dtype=np.float64)
        s = np.sort(samples.astype(np.float64).ravel())
        if s.size == 0:
            raise ValueError("empirical CDF needs at least one sample")
        if np.any(np.isnan(s)):
            raise ValueError("samples must not contain NaN")
        self.sorted_samples = s
        self.n = s.size

    def __call__(self, t):
        out = np.searchsorted(self.sorted_samples, t, side="right") / self.n
        return float(out) if np.ndim(out) == 0 else out

    def sup_distance(self, other: "EmpiricalCdf") -> float:
        # both are step functions; the gap is constant between merged jump points
        jumps = np.union1d(self.sorted_samples, other.sorted_samples)
        return float(np.max(np.abs(self(jumps) - other(jumps))))


def min_pvalue_cdf(samples) -> EmpiricalCdf:
    """Empirical CDF of ``p_cap`` over a batch of separability results."""
    values = [s.p_cap if isinstance(s, SeparabilityScore) else float(s) for s in samples]
    if not values:
        raise ValueError("min_pvalue_cdf needs at least one sample")
    return EmpiricalCdf(np.asarray(values))


def dkw_band(n: int, alpha: float) -> float:
    """Radius ``sqrt(ln(2/alpha) / (2n))`` of the DKW uniform confidence band."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(np.sqrt(np.log(2.0 / alpha) / (2.0 * n)))
