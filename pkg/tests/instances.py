"""Random expiry-vector pairs for effectiveness and emptiness checks."""

import numpy as np

from confsep.effectiveness import AttackInstance


def _grid(rng, n):
    return lambda lo, hi: rng.integers(lo, hi + 1) / (n + 1)


def random_instance(rng: np.random.Generator) -> AttackInstance:
    """Unconstrained quantized instance; small ``n`` makes ties common."""
    K = int(rng.integers(2, 8))
    n = int(rng.choice([4, 9, 19, 99, 999]))
    tau_D = rng.integers(1, n + 2, size=K) / (n + 1)
    tau_P = rng.integers(1, n + 2, size=K) / (n + 1)
    y, t_y = (int(v) for v in rng.choice(K, size=2, replace=rng.random() < 0.1))
    if rng.random() < 0.5:
        # bias toward successful attacks so every derive mode gets exercised
        tau_P[t_y] = max(tau_P[t_y], rng.integers(n // 2 + 1, n + 2) / (n + 1))
    return AttackInstance(tau_D, tau_P, y, t_y)


def effective_instance(rng: np.random.Generator) -> tuple[AttackInstance, float]:
    """Instance built to satisfy both effectiveness conditions at the returned level."""
    K = int(rng.integers(2, 8))
    n = int(rng.choice([9, 19, 99, 999]))
    g = _grid(rng, n)
    on_grid = rng.random() < 0.5
    # the level sits exactly on the p-value grid (boundary case) or strictly between points
    j = int(rng.integers(2 if on_grid else 1, n + 1))
    r = j / (n + 1) if on_grid else (j + rng.uniform(0.01, 0.99)) / (n + 1)
    below = j - 1 if on_grid else j  # largest grid index strictly below r
    y, t_y = (int(v) for v in rng.choice(K, size=2, replace=False))
    tau_D = np.array([g(1, n + 1) for _ in range(K)])
    tau_D[t_y] = g(1, below)
    tau_D[y] = g(int(round(tau_D[t_y] * (n + 1))) + 1, n + 1)
    tau_P = np.array([g(1, j) for _ in range(K)])
    tau_P[t_y] = g(j + 1, n + 1)
    return AttackInstance(tau_D, tau_P, y, t_y), r
