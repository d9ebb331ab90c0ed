"""Seeded Gaussian-mixture datasets.

Items are drawn IID, hence exchangeable. Class centroids depend only on
the :class:`MixtureSpec`, never on the sampling seed, so every dataset
drawn from one spec comes from the same distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset


def derive_seed(parent: int, stream: int) -> int:
    """Child seed for an independent stream: ``mix(parent, stream)``."""
    ss = np.random.SeedSequence([int(parent) & 0xFFFFFFFFFFFFFFFF, int(stream)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int) -> np.random.Generator:
    # Philox is counter-based, so streams are cheap and reproducible
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class MixtureSpec:
    num_classes: int = 4
    dim: int = 16
    separation: float = 4.0
    noise_sigma: float = 1.0
    class_weights: tuple[float, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.separation > 0:
            raise ValueError("separation must be positive")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be positive")
        if self.class_weights is None:
            object.__setattr__(self, "class_weights", (1.0 / self.num_classes,) * self.num_classes)
        w = tuple(float(v) for v in self.class_weights)
        if len(w) != self.num_classes:
            raise ValueError(f"class_weights has {len(w)} entries, expected {self.num_classes}")
        if any(v <= 0 for v in w):
            raise ValueError("class_weights must be positive")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"class_weights must sum to 1, got {sum(w)}")
        object.__setattr__(self, "class_weights", w)

    def centroids(self) -> np.ndarray:
        """Class means, shape ``(num_classes, dim)``.

        The first ``min(num_classes, dim)`` classes sit on coordinate axes at
        ``separation / sqrt(2)`` so that any two of them are ``separation``
        apart. Extra classes (``num_classes > dim``) get random unit
        directions from a generator seeded by the mixture parameters.
        """
        K, d = self.num_classes, self.dim
        radius = self.separation / np.sqrt(2.0)
        C = np.zeros((K, d))
        for c in range(min(K, d)):
            C[c, c] = radius
        if K > d:
            g = rng_for(derive_seed(K * 1_000_003 + d, 0x5EED))
            extra = g.standard_normal((K - d, d))
            extra /= np.linalg.norm(extra, axis=1, keepdims=True)
            C[d:] = radius * extra
        return C


def sample_dataset(spec: MixtureSpec, n: int, seed: int) -> LabeledDataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    g = rng_for(seed)
    y = g.choice(spec.num_classes, size=n, p=np.asarray(spec.class_weights))
    X = spec.centroids()[y] + spec.noise_sigma * g.standard_normal((n, spec.dim))
    return LabeledDataset(X, y, spec.num_classes)


def sample_points(spec: MixtureSpec, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    D = sample_dataset(spec, n, seed)
    return D.X, D.y


def permutation(n: int, seed: int) -> np.ndarray:
    return rng_for(seed).permutation(n)


def permute(D: LabeledDataset, seed: int) -> LabeledDataset:
    """Uniformly random reordering of ``D``; the item multiset is unchanged."""
    return D.take(permutation(len(D), seed))
