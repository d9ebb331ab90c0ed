"""Trigger poison attacks.

An attack is a splitting of the dataset positions into a poisoned part and
a clean part, followed by a trigger applied to the poisoned part only.
Every stochastic step is a pure function of its inputs and a seed.
Reuniting the two parts restores the original positions, so poisoning
with an identity trigger returns the source dataset unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import p_value
from .data import LabeledDataset
from .scores import ScoreModel
from .synth import derive_seed, rng_for

DEFAULT_MARKER = 5.0


@dataclass(frozen=True)
class SplitPlan:
    poison_indices: tuple[int, ...]
    clean_indices: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        p, c = set(self.poison_indices), set(self.clean_indices)
        n = len(p) + len(c)
        if p & c:
            raise ValueError("poison and clean indices overlap")
        if p | c != set(range(n)):
            raise ValueError("poison and clean indices must partition 0..n-1")
        if not 0 < len(p) < n:
            raise ValueError(f"splitting requires 0 < k < n, got k={len(p)}, n={n}")

    @property
    def n(self) -> int:
        return len(self.poison_indices) + len(self.clean_indices)

    @property
    def k(self) -> int:
        return len(self.poison_indices)

    @classmethod
    def from_poison(cls, n: int, poison, seed: int | None = None) -> "SplitPlan":
        poison = sorted(int(i) for i in poison)
        chosen = set(poison)
        clean = [i for i in range(n) if i not in chosen]
        return cls(tuple(poison), tuple(clean), seed)


def _check_k(n: int, k: int) -> None:
    if not 0 < k < n:
        raise ValueError(f"splitting requires 0 < k < n, got k={k}, n={n}")


def split_first_k(n: int, k: int, selector: Sequence[bool] | None = None) -> SplitPlan:
    """First ``k`` positions matching ``selector`` (all positions when None)."""
    _check_k(n, k)
    if selector is None:
        matches = np.arange(n)
    else:
        sel = np.asarray(selector, dtype=bool)
        if sel.shape != (n,):
            raise ValueError(f"selector must have length {n}")
        matches = np.flatnonzero(sel)
    if len(matches) < k:
        raise ValueError(f"only {len(matches)} positions match the selector, need {k}")
    return SplitPlan.from_poison(n, matches[:k])


def label_selector(D: LabeledDataset, labels) -> np.ndarray:
    return np.isin(D.y, np.asarray(list(labels)))


def split_uniform(n: int, k: int, seed: int) -> SplitPlan:
    _check_k(n, k)
    chosen = rng_for(seed).choice(n, size=k, replace=False)
    return SplitPlan.from_poison(n, chosen, seed)


def split_score_guided(D: LabeledDataset, score: ScoreModel, target: int, k: int) -> SplitPlan:
    """The ``k`` items whose leave-one-out p-value for ``target`` is highest.

    A greedy stand-in for optimizing which items to modify: the items that
    already look most like ``target`` need the smallest change. Ties go to
    the lower position.
    """
    n = len(D)
    _check_k(n, k)
    if not 0 <= target < D.num_classes:
        raise ValueError(f"unknown target label {target}")
    pvals = np.empty(n)
    for i in range(n):
        rest = D.take(np.delete(np.arange(n), i))
        pvals[i] = p_value(rest, score, D.X[i], target)
    order = sorted(range(n), key=lambda i: (-pvals[i], i))
    return SplitPlan.from_poison(n, order[:k])


@dataclass(frozen=True)
class TriggerSpec:
    patch_coords: tuple[int, ...]
    patch_values: tuple[float, ...]
    target_label: int
    placement: str = "fixed"

    def __post_init__(self) -> None:
        coords = tuple(int(c) for c in self.patch_coords)
        values = tuple(float(v) for v in self.patch_values)
        if len(coords) == 0:
            raise ValueError("trigger needs at least one coordinate")
        if len(coords) != len(values):
            raise ValueError("patch_coords and patch_values differ in length")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("patch values must be finite")
        if self.placement not in ("fixed", "random"):
            raise ValueError(f"placement must be 'fixed' or 'random', got {self.placement!r}")
        object.__setattr__(self, "patch_coords", coords)
        object.__setattr__(self, "patch_values", values)
        object.__setattr__(self, "target_label", int(self.target_label))


def default_trigger(dim: int, target_label: int = 0, marker: float = DEFAULT_MARKER,
                    placement: str = "fixed") -> TriggerSpec:
    """Marker patch over the trailing ``ceil(dim / 8)`` coordinates."""
    width = math.ceil(dim / 8)
    coords = tuple(range(dim - width, dim))
    return TriggerSpec(coords, (marker,) * width, target_label, placement)


def _window(spec: TriggerSpec, d: int, seed: int) -> np.ndarray:
    coords = np.asarray(spec.patch_coords)
    if coords.min() < 0 or coords.max() >= d:
        raise ValueError(f"patch coordinates {spec.patch_coords} do not fit dimension {d}")
    if spec.placement == "fixed":
        return coords
    lo, hi = -int(coords.min()), d - 1 - int(coords.max())
    return coords + int(rng_for(seed).integers(lo, hi + 1))


def apply_trigger(item, spec: TriggerSpec, seed: int = 0) -> tuple[np.ndarray, int]:
    x, _ = item
    x = np.array(x, dtype=np.float64, copy=True)
    x[_window(spec, x.shape[0], seed)] = spec.patch_values
    return x, spec.target_label


def apply_trigger_batch(X, spec: TriggerSpec, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Trigger every row of ``X``; row ``i`` uses seed ``derive_seed(seed, i)``."""
    X = np.array(X, dtype=np.float64, copy=True)
    for i in range(X.shape[0]):
        X[i], _ = apply_trigger((X[i], 0), spec, derive_seed(seed, i))
    return X, np.full(X.shape[0], spec.target_label, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class PoisonedDataset:
    items: LabeledDataset
    plan: SplitPlan
    spec: TriggerSpec
    seed: int

    @property
    def rate(self) -> float:
        return self.plan.k / self.plan.n


def poison(D: LabeledDataset, plan: SplitPlan, spec: TriggerSpec, seed: int = 0) -> PoisonedDataset:
    if plan.n != len(D):
        raise ValueError(f"plan is sized for n={plan.n}, dataset has {len(D)} items")
    if not 0 <= spec.target_label < D.num_classes:
        raise ValueError(f"target label {spec.target_label} outside alphabet")
    X = np.array(D.X, copy=True)
    y = np.array(D.y, copy=True)
    for i in plan.poison_indices:
        X[i], y[i] = apply_trigger((X[i], y[i]), spec, derive_seed(seed, i))
    return PoisonedDataset(LabeledDataset(X, y, D.num_classes), plan, spec, int(seed))


def k_for_rate(rate: float, n: int) -> int:
    """``round(rate * n)`` clamped to ``[1, n - 1]``; rate 0 gives 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"poison rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return 0
    if n < 2:
        raise ValueError("splitting requires 0 < k < n; dataset too small")
    k = int(math.floor(rate * n + 0.5))
    return min(max(k, 1), n - 1)


def poison_at_rate(D: LabeledDataset, rate: float, spec: TriggerSpec, seed: int) -> PoisonedDataset | None:
    """Uniform splitting at ``rate`` then trigger; ``None`` for rate 0."""
    k = k_for_rate(rate, len(D))
    if k == 0:
        return None
    plan = split_uniform(len(D), k, derive_seed(seed, 0))
    return poison(D, plan, spec, derive_seed(seed, 1))
