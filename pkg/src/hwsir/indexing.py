"""Enumeration of structure compositions ``(S, I)`` tracked by the reduced model."""
from __future__ import annotations

import numpy as np


class StateIndexer:
    """Compositions ``(n - i, i)`` for ``2 <= n <= n_max``, ``0 <= i <= n - 1``.

    Ordered by ``n`` then ``i``; ``(n - i, i)`` sits at 0-based position
    ``(n - 1) * n // 2 + i - 1``.
    """

    def __init__(self, n_max: int):
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        self.n_max = n_max
        S, I = [], []
        for n in range(2, n_max + 1):
            for i in range(n):
                S.append(n - i)
                I.append(i)
        self.S = np.array(S, dtype=np.int64)
        self.I = np.array(I, dtype=np.int64)
        size = len(S)
        self.pred = np.full(size, -1, dtype=np.int64)  # (S + 1, I - 1), infection inflow
        self.succ = np.full(size, -1, dtype=np.int64)  # (S, I + 1), recovery inflow
        for k in range(size):
            s, i = S[k], I[k]
            if i >= 1:
                self.pred[k] = self.position(s + 1, i - 1)
            if s + i < n_max:
                self.succ[k] = self.position(s, i + 1)

    def __len__(self):
        return self.S.size

    @staticmethod
    def c(S: int, I: int) -> int:
        """1-based position of ``(S, I)``."""
        n = S + I
        return (n - 1) * n // 2 + I

    def position(self, S: int, I: int) -> int:
        if S < 1 or I < 0 or not 2 <= S + I <= self.n_max:
            raise KeyError((S, I))
        return self.c(S, I) - 1

    def states(self) -> list[tuple[int, int]]:
        return list(zip(self.S.tolist(), self.I.tolist()))

    def from_grid(self, grid: np.ndarray) -> np.ndarray:
        """Pick tracked entries out of a ``[S, I]`` indexed array."""
        grid = np.asarray(grid)
        out = np.zeros(len(self))
        ok = (self.S < grid.shape[0]) & (self.I < grid.shape[1])
        out[ok] = grid[self.S[ok], self.I[ok]]
        return out

    def to_grid(self, values: np.ndarray) -> np.ndarray:
        grid = np.zeros((self.n_max + 1, self.n_max + 1))
        grid[self.S, self.I] = values
        return grid
