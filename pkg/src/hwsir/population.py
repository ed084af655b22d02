"""Two-layer partition of a population into households and workplaces."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .size_dist import SizeDistribution, sample

LAYERS = ("H", "W")


def assemble_layer(K: int, d: SizeDistribution, rng: np.random.Generator) -> list[np.ndarray]:
    """Partition individuals ``0..K-1`` into cliques with sizes drawn from ``d``.

    While ``k`` individuals remain unassigned, a target size ``n`` is drawn
    and a clique of ``min(n, k)`` uniformly chosen unassigned individuals
    is formed, so only the last clique can be truncated. Member arrays are
    sorted; cliques are in creation order.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    # successive uniform draws without replacement from the unassigned pool
    # are consecutive chunks of a uniform random permutation
    perm = rng.permutation(K)
    batch = int(K / d.mean() * 1.1) + 16
    targets = []
    total = 0
    while total < K:
        more = sample(d, rng, batch)
        targets.extend(more.tolist())
        total += int(more.sum())
    bounds = np.cumsum(targets)
    n_groups = int(np.searchsorted(bounds, K)) + 1
    ends = np.minimum(bounds[:n_groups], K)
    starts = np.concatenate([[0], ends[:-1]])
    groups = [np.sort(perm[a:b]) for a, b in zip(starts, ends)]
    return groups


@dataclass
class PopulationGraph:
    K: int
    household_of: np.ndarray
    workplace_of: np.ndarray
    household_members: list[np.ndarray] = field(repr=False)
    workplace_members: list[np.ndarray] = field(repr=False)

    @classmethod
    def from_groups(cls, K: int, households, workplaces) -> "PopulationGraph":
        hh = _membership(K, households)
        wp = _membership(K, workplaces)
        return cls(K, hh, wp, [np.asarray(g) for g in households], [np.asarray(g) for g in workplaces])

    @property
    def K_H(self) -> int:
        return len(self.household_members)

    @property
    def K_W(self) -> int:
        return len(self.workplace_members)

    def structure_of(self, layer: str) -> np.ndarray:
        return self.household_of if layer == "H" else self.workplace_of

    def members(self, layer: str) -> list[np.ndarray]:
        return self.household_members if layer == "H" else self.workplace_members

    def sizes(self, layer: str) -> np.ndarray:
        return np.array([len(g) for g in self.members(layer)])

    def validate(self, n_max: int | None = None) -> None:
        """Raise ``AssertionError`` if the partition invariants fail."""
        for layer in LAYERS:
            of = self.structure_of(layer)
            mem = self.members(layer)
            assert of.shape == (self.K,)
            seen = np.zeros(self.K, dtype=int)
            for sid, g in enumerate(mem):
                assert len(g) >= 1
                assert np.all(of[g] == sid)
                seen[g] += 1
            assert np.all(seen == 1), f"layer {layer}: not a partition"
            sizes = self.sizes(layer)
            assert sizes.sum() == self.K
            if n_max is not None:
                assert sizes.max() <= n_max
                assert self.K / n_max <= len(mem) <= self.K

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["individual", "household_id", "workplace_id"])
            for j in range(self.K):
                w.writerow([j, int(self.household_of[j]), int(self.workplace_of[j])])

    @classmethod
    def from_csv(cls, path) -> "PopulationGraph":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, dtype=int, ndmin=2)
        order = np.argsort(data[:, 0])
        data = data[order]
        K = data.shape[0]
        hh = [np.flatnonzero(data[:, 1] == h) for h in range(data[:, 1].max() + 1)]
        wp = [np.flatnonzero(data[:, 2] == w) for w in range(data[:, 2].max() + 1)]
        return cls.from_groups(K, hh, wp)


def _membership(K, groups) -> np.ndarray:
    of = np.full(K, -1, dtype=np.int64)
    for sid, g in enumerate(groups):
        of[np.asarray(g)] = sid
    return of


def build(K: int, pi_H: SizeDistribution, pi_W: SizeDistribution, rng) -> PopulationGraph:
    """Households and workplaces from two independent assemblies.

    ``rng`` may be a single generator or a ``(household_rng, workplace_rng)``
    pair; a single generator is split into two child streams so that the
    household layer does not depend on ``pi_W``.
    """
    if isinstance(rng, tuple):
        rng_h, rng_w = rng
    else:
        rng_h, rng_w = rng.spawn(2)
    return PopulationGraph.from_groups(
        K, assemble_layer(K, pi_H, rng_h), assemble_layer(K, pi_W, rng_w)
    )


def empirical_size_dist(g: PopulationGraph, layer: str) -> SizeDistribution:
    counts = np.bincount(g.sizes(layer)).astype(float)
    return SizeDistribution(counts / counts.sum())


def total_variation(a: SizeDistribution, b: SizeDistribution) -> float:
    n = max(a.n_max, b.n_max) + 1
    pa = np.zeros(n)
    pb = np.zeros(n)
    pa[: a.probs.size] = a.probs
    pb[: b.probs.size] = b.probs
    return 0.5 * float(np.abs(pa - pb).sum())
