"""Attack-effectiveness predicates over clean and poisoned expiry vectors.

Notation: ``tau_D`` is the clean expiry at the triggered input, ``tau_P``
the poisoned one, ``y`` the original label and ``t_y`` the attack target.
``max_other(tau_P)`` is the largest entry of ``tau_P`` outside ``t_y``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class AttackInstance:
    tau_D: np.ndarray
    tau_P: np.ndarray
    y: int
    t_y: int

    def __post_init__(self) -> None:
        tD = np.asarray(self.tau_D, dtype=np.float64)
        tP = np.asarray(self.tau_P, dtype=np.float64)
        if tD.ndim != 1 or tD.shape != tP.shape:
            raise ValueError("expiry vectors must be 1-d and cover the same labels")
        K = tD.shape[0]
        for name in ("y", "t_y"):
            if not 0 <= int(getattr(self, name)) < K:
                raise ValueError(f"{name} outside label alphabet of size {K}")
        object.__setattr__(self, "tau_D", tD)
        object.__setattr__(self, "tau_P", tP)
        object.__setattr__(self, "y", int(self.y))
        object.__setattr__(self, "t_y", int(self.t_y))

    @property
    def max_other_P(self) -> float:
        """Largest poisoned p-value among labels other than the target."""
        rest = np.delete(self.tau_P, self.t_y)
        return float(rest.max()) if rest.size else 0.0


def is_non_trivial(a: AttackInstance) -> bool:
    return bool(a.tau_D[a.t_y] < a.tau_D[a.y])


def is_weakly_effective(a: AttackInstance) -> bool:
    return bool(a.tau_P[a.y] < a.tau_P[a.t_y])


def is_empirically_effective(a: AttackInstance, r: float) -> bool:
    """Both effectiveness conditions at level ``r``.

    The second condition is ``max_other <= r < tau_P[t_y]``: a non-target
    p-value equal to ``r`` is still admissible.
    """
    re1 = a.tau_D[a.t_y] < min(r, a.tau_D[a.y])
    re2 = a.max_other_P <= r < a.tau_P[a.t_y]
    return bool(re1 and re2)


@dataclass(frozen=True)
class DerivedRate:
    """An admissible level ``r`` together with the admissible range it came from.

    For point results (lemma, obs_ii) ``low == high == r``; for interval
    results (obs_i, obs_iii) ``r`` is the midpoint of the open ``(low, high)``.
    """

    r: float
    low: float
    high: float


DERIVE_MODES = ("lemma", "obs_i", "obs_ii", "obs_iii")


def _open_midpoint(low: float, high: float) -> DerivedRate | None:
    mid = 0.5 * (low + high)
    if not low < mid < high:
        return None
    return DerivedRate(mid, low, high)


def derive_r(a: AttackInstance, mode: str) -> DerivedRate | None:
    """Level ``r`` at which the attack is empirically effective, or None.

    ``lemma``: needs non-triviality, ``max_other(tau_P) < tau_P[t_y]`` (1)
    and ``max(tau_D) < tau_P[t_y]`` (2); returns
    ``max(tau_D[y], max_other(tau_P))``.
    ``obs_i``: (1) and (2); any ``r`` strictly between
    ``max(tau_D[t_y], max_other(tau_P))`` and ``tau_P[t_y]``.
    ``obs_ii``: (1) and ``tau_D[t_y] < max_other(tau_P)``; ``r = max_other(tau_P)``.
    ``obs_iii``: (2) and ``max_other(tau_P) < tau_D[t_y]``; any ``r``
    strictly between ``tau_D[t_y]`` and ``tau_P[t_y]``.
    """
    if mode not in DERIVE_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {DERIVE_MODES}")
    if not is_non_trivial(a):
        return None
    target_P = a.tau_P[a.t_y]
    other_P = a.max_other_P
    target_D = a.tau_D[a.t_y]
    cond1 = other_P < target_P
    cond2 = a.tau_D.max() < target_P

    if mode == "lemma":
        if not (cond1 and cond2):
            return None
        r = float(max(a.tau_D[a.y], other_P))
        return DerivedRate(r, r, r)
    if mode == "obs_i":
        if not (cond1 and cond2):
            return None
        return _open_midpoint(float(max(target_D, other_P)), float(target_P))
    if mode == "obs_ii":
        if not (cond1 and target_D < other_P):
            return None
        return DerivedRate(other_P, other_P, other_P)
    if not (cond2 and other_P < target_D):
        return None
    return _open_midpoint(float(target_D), float(target_P))


def effective_rate(instances: Sequence[AttackInstance], r: float) -> float:
    """Fraction of instances that are empirically effective at level ``r``."""
    instances = list(instances)
    if not instances:
        raise ValueError("effective_rate needs at least one instance")
    return sum(is_empirically_effective(a, r) for a in instances) / len(instances)
