"""Fenwick (binary indexed) tree for dynamic weighted sampling."""
from __future__ import annotations


class FenwickSampler:
    """Non-negative integer weights over ``0..n-1`` with O(log n) update and draw.

    Integer weights keep the running total exact, which the simulation
    relies on when comparing aggregates to a from-scratch recount.
    """

    def __init__(self, weights):
        weights = [int(w) for w in weights]
        n = len(weights)
        self._n = n
        self._w = list(weights)
        tree = [0] * (n + 1)
        for i, w in enumerate(weights, start=1):
            tree[i] += w
            j = i + (i & -i)
            if j <= n:
                tree[j] += tree[i]
        self._tree = tree
        top = 1
        while top * 2 <= n:
            top *= 2
        self._top = top
        self.total = sum(weights)

    def __len__(self):
        return self._n

    def __getitem__(self, i: int) -> int:
        return self._w[i]

    def add(self, i: int, delta: int) -> None:
        if delta == 0:
            return
        self._w[i] += delta
        self.total += delta
        tree = self._tree
        n = self._n
        j = i + 1
        while j <= n:
            tree[j] += delta
            j += j & -j

    def set(self, i: int, value: int) -> None:
        self.add(i, int(value) - self._w[i])

    def prefix(self, i: int) -> int:
        """Sum of weights ``0..i-1``."""
        s = 0
        tree = self._tree
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def find(self, r: int) -> int:
        """Smallest index ``i`` with ``prefix(i + 1) > r`` for ``0 <= r < total``."""
        if not 0 <= r < self.total:
            raise ValueError(f"target {r} outside [0, {self.total})")
        pos = 0
        step = self._top
        tree = self._tree
        n = self._n
        while step:
            nxt = pos + step
            if nxt <= n and tree[nxt] <= r:
                pos = nxt
                r -= tree[nxt]
            step >>= 1
        return pos

    def sample(self, rng) -> int:
        """Draw an index with probability proportional to its weight."""
        return self.find(int(rng.integers(self.total)))
