"""Structure-size distributions (households, workplaces)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

NORMALIZE_TOL = 1e-9


class DistributionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SizeDistribution:
    """Probability law on sizes ``1..n_max`` stored densely.

    ``probs[j]`` is the probability of size ``j``; ``probs[0]`` is always 0.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise DistributionError("need at least one size")
        if p[0] != 0.0:
            raise DistributionError("size 0 must have probability 0")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise DistributionError("probabilities must be finite and non-negative")
        total = p.sum()
        if abs(total - 1.0) > NORMALIZE_TOL:
            raise DistributionError(f"probabilities sum to {float(total)!r}, not 1")
        p = p / total
        # trim trailing zeros so n_max is the largest size actually used
        last = int(np.flatnonzero(p)[-1])
        p = p[: last + 1]
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_mapping(cls, probs: Mapping[int, float]) -> "SizeDistribution":
        if not probs:
            raise DistributionError("empty distribution")
        sizes = [int(k) for k in probs]
        if min(sizes) < 1:
            raise DistributionError("sizes must be >= 1")
        dense = np.zeros(max(sizes) + 1)
        for k, v in probs.items():
            dense[int(k)] += float(v)
        return cls(dense)

    @classmethod
    def point_mass(cls, n: int) -> "SizeDistribution":
        return cls.from_mapping({n: 1.0})

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(self.probs.size)

    def __getitem__(self, n: int) -> float:
        if 0 <= n <= self.n_max:
            return float(self.probs[n])
        return 0.0

    def __eq__(self, other):
        if not isinstance(other, SizeDistribution):
            return NotImplemented
        return self.probs.shape == other.probs.shape and bool(np.all(self.probs == other.probs))

    def __hash__(self):
        return hash(self.probs.tobytes())

    def to_mapping(self) -> dict[int, float]:
        return {int(j): float(p) for j, p in enumerate(self.probs) if p > 0}

    def mean(self) -> float:
        return mean(self)

    def size_biased(self) -> "SizeDistribution":
        return size_biased(self)

    def truncate(self, n_max: int) -> "SizeDistribution":
        """Restrict to sizes ``<= n_max`` and renormalize."""
        p = np.array(self.probs[: n_max + 1])
        if p.sum() <= 0:
            raise DistributionError(f"no mass at sizes <= {n_max}")
        return SizeDistribution(p / p.sum())

    def sample(self, rng: np.random.Generator, size=None):
        return sample(self, rng, size)


def mean(d: SizeDistribution) -> float:
    return float(np.dot(d.sizes, d.probs))


def size_biased(d: SizeDistribution) -> SizeDistribution:
    """Law of the size of the structure containing a uniformly chosen individual."""
    w = d.sizes * d.probs
    return SizeDistribution(w / w.sum())


def sample(d: SizeDistribution, rng: np.random.Generator, size=None):
    """Draw sizes with probability ``probs[j]``; reproducible for a given generator state."""
    cdf = np.cumsum(d.probs)
    cdf[-1] = 1.0
    u = rng.random(size)
    out = np.searchsorted(cdf, u, side="right")
    if size is None:
        return int(out)
    return out


def default_household() -> SizeDistribution:
    """Synthetic household-size law shipped as a default.

    A stand-in only; not derived from census data.
    """
    return SizeDistribution.from_mapping({1: 0.3, 2: 0.3, 3: 0.2, 4: 0.15, 5: 0.05})


def default_workplace(n_max: int = 50, decay: float = 0.92) -> SizeDistribution:
    """Synthetic workplace-size law on ``1..n_max``, ``P(j)`` proportional to ``decay**(j-1)``."""
    w = np.zeros(n_max + 1)
    w[1:] = decay ** np.arange(n_max)
    return SizeDistribution(w / w.sum())
