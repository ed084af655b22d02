"""Edge-based compartmental model (EBCM) for the two-clique-layer epidemic.

State layout::

    [i, theta_G, theta^H_1..theta^H_nH, theta^W_1..theta^W_nW,
     n^H_(S,I,R) blocks, n^W_(S,I,R) blocks]

Triples are enumerated size-major (n = 1..n_max), then by I, then by R,
with S = n - I - R; a size-n block holds (n + 1)(n + 2)/2 triples.
Only triples of size n >= 2 with S >= 2 or S * I >= 1 evolve.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateState
from .integrator import IntegratorConfig, integrate
from .reduced import ReducedParams, _write_csv

M_FLOOR = 1e-14


class TripleIndexer:
    def __init__(self, n_max: int):
        self.n_max = n_max
        n_, S_, I_, R_ = [], [], [], []
        for n in range(1, n_max + 1):
            for I in range(n + 1):
                for R in range(n - I + 1):
                    n_.append(n)
                    S_.append(n - I - R)
                    I_.append(I)
                    R_.append(R)
        self.n = np.array(n_)
        self.S = np.array(S_)
        self.I = np.array(I_)
        self.R = np.array(R_)
        self._pos = {(a, b, c): k for k, (a, b, c) in enumerate(zip(S_, I_, R_))}

    def __len__(self):
        return self.n.size

    @staticmethod
    def count(n_max: int) -> int:
        return sum((n + 1) * (n + 2) // 2 for n in range(1, n_max + 1))

    def position(self, S: int, I: int, R: int) -> int:
        return self._pos[(S, I, R)]

    def get(self, S, I, R, default=-1) -> int:
        return self._pos.get((S, I, R), default)


class _EBCMLayer:
    def __init__(self, lam, pi, theta_sl, block_sl):
        self.lam = lam
        self.pi = pi
        self.n_max = pi.n_max
        self.pi_hat = np.zeros(self.n_max + 1)
        self.pi_hat[:] = pi.size_biased().probs
        self.theta_sl = theta_sl  # theta_1..theta_nmax
        self.sl = block_sl
        ix = TripleIndexer(self.n_max)
        self.ix = ix
        S, I, R, n = ix.S, ix.I, ix.R, ix.n
        self.Sf, self.If = S.astype(float), I.astype(float)
        self.SI = self.Sf * self.If
        self.active = (n >= 2) & ((S >= 2) | (S * I >= 1))
        self.rec_src = np.array([ix.get(s, i + 1, r - 1) if r >= 1 else -1
                                 for s, i, r in zip(S, I, R)])
        # infection inflow from (S + 1, I - 1, R) for every I >= 1, including a first infection
        self.inf_src = np.array([ix.get(s + 1, i - 1, r) if i >= 1 else -1
                                 for s, i, r in zip(S, I, R)])
        self.has_rec = self.rec_src >= 0
        self.has_inf = self.inf_src >= 0
        self.rec_src = np.where(self.has_rec, self.rec_src, 0)
        self.inf_src = np.where(self.has_inf, self.inf_src, 0)
        self.size_of = n  # size of each triple's structure
        # sum over triples of the same size: T_n = lam * sum SI n_(S,I,R)
        self.size_matrix = np.zeros((self.n_max + 1, len(ix)))
        self.size_matrix[n, np.arange(len(ix))] = 1.0


class EBCM:
    def __init__(self, params: ReducedParams):
        self.params = params
        nH, nW = params.pi_H.n_max, params.pi_W.n_max
        a = 2
        tH = slice(a, a + nH)
        tW = slice(tH.stop, tH.stop + nW)
        bH = slice(tW.stop, tW.stop + TripleIndexer.count(nH))
        bW = slice(bH.stop, bH.stop + TripleIndexer.count(nW))
        self.dim = bW.stop
        self.H = _EBCMLayer(params.lambda_H, params.pi_H, tH, bH)
        self.W = _EBCMLayer(params.lambda_W, params.pi_W, tW, bW)

    def layer(self, X):
        return self.H if X == "H" else self.W

    def column_names(self) -> list[str]:
        names = ["i", "theta_G"]
        for X in ("H", "W"):
            names += [f"theta{X}_{n}" for n in range(1, self.layer(X).n_max + 1)]
        for X in ("H", "W"):
            L = self.layer(X)
            names += [f"n{X}_{s}_{i}_{r}" for s, i, r in zip(L.ix.S, L.ix.I, L.ix.R)]
        return names

    def _A(self, y, L):
        theta = y[L.theta_sl]
        return float(np.dot(L.pi_hat[1:], theta))

    def recover_s(self, y) -> float:
        return float(y[1] * self._A(y, self.H) * self._A(y, self.W))

    def initial_condition(self, eps: float) -> np.ndarray:
        """Small-``eps`` initial condition, implemented as printed.

        ``n_(n,0,0) = pi_hat_n (1 - eps)^n / n`` and
        ``n_(n-I,I,0) = pi_hat_n (1 - eps)^(n-I) eps^I`` for ``1 <= I <= n - 1``.
        """
        if not 0.0 <= eps <= 1.0:
            raise ValueError(f"seed fraction {eps} outside [0, 1]")
        if eps > 0.01:
            warnings.warn(f"EBCM initial condition is a small-eps approximation; eps={eps}",
                          stacklevel=2)
        y = np.zeros(self.dim)
        y[0] = eps
        y[1] = 1.0 - eps
        for L in (self.H, self.W):
            y[L.theta_sl] = 1.0 - eps
            block = np.zeros(len(L.ix))
            for n in range(1, L.n_max + 1):
                ph = L.pi_hat[n]
                block[L.ix.position(n, 0, 0)] = ph * (1 - eps) ** n / n
                for I in range(1, n):
                    block[L.ix.position(n - I, I, 0)] = ph * (1 - eps) ** (n - I) * eps ** I
            y[L.sl] = block
        return y

    def _layer_terms(self, y, L):
        block = y[L.sl]
        T = L.lam * (L.size_matrix @ (L.SI * block))  # T_n indexed by size
        return block, T

    def rhs(self, t, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        p = self.params
        i, thG = y[0], y[1]
        f = np.zeros(self.dim)
        A = {"H": self._A(y, self.H), "W": self._A(y, self.W)}
        s = thG * A["H"] * A["W"]
        terms = {X: self._layer_terms(y, self.layer(X)) for X in ("H", "W")}
        f[1] = -p.beta_G * i * thG
        for X, Xb in (("H", "W"), ("W", "H")):
            L = self.layer(X)
            block, T = terms[X]
            theta = np.zeros(L.n_max + 1)
            theta[1:] = y[L.theta_sl]
            m = thG * L.pi_hat * theta * A[Xb]  # susceptibles in size-n X structures
            m[:2] = 0.0
            ok = m >= M_FLOOR
            if A[X] <= 0:
                raise DegenerateState(f"no escape probability mass left in layer {X}")
            # external infections into size-n structures, per capita; tau / m is the
            # per-susceptible hazard beta_G * i + sum_k T^Xbar_k / s
            tau = (p.beta_G * i * s + terms[Xb][1].sum()) * L.pi_hat * theta / A[X]
            T_over_m = np.where(ok, T / np.where(ok, m, 1.0), 0.0)
            tau_over_m = np.where(ok, tau / np.where(ok, m, 1.0), 0.0)
            dtheta = -T_over_m * theta
            dtheta[:2] = 0.0  # theta_1 is constant
            f[L.theta_sl] = dtheta[1:]
            ext = tau_over_m[L.size_of]
            out = (L.lam * L.SI + ext * L.Sf + p.gamma * L.If) * block
            rec_in = p.gamma * (L.If + 1) * block[L.rec_src] * L.has_rec
            inf_in = (L.lam * (L.Sf + 1) * (L.If - 1) + ext * (L.Sf + 1)) * block[L.inf_src] * L.has_inf
            f[L.sl] = np.where(L.active, -out + rec_in + inf_in, 0.0)
        # i' = -s' - gamma i with s = theta_G * A_H * A_W
        dA_H = float(np.dot(self.H.pi_hat[1:], f[self.H.theta_sl]))
        dA_W = float(np.dot(self.W.pi_hat[1:], f[self.W.theta_sl]))
        ds = f[1] * A["H"] * A["W"] + thG * dA_H * A["W"] + thG * A["H"] * dA_W
        f[0] = -ds - p.gamma * i
        return f

    def solve(self, y0, T, grid=None, config: IntegratorConfig | None = None):
        if grid is None:
            grid = np.linspace(0.0, T, 201)
        grid = np.asarray(grid, dtype=float)
        config = config or IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)
        sol, vals = integrate(self.rhs, y0, (0.0, T), config, grid)
        return EBCMSolution(self, grid, vals, sol)


@dataclass
class EBCMSolution:
    model: EBCM
    t: np.ndarray
    y: np.ndarray
    dense: object

    @property
    def i(self):
        return self.y[:, 0]

    @property
    def s(self):
        return np.array([self.model.recover_s(row) for row in self.y])

    def to_csv(self, path, full: bool = False) -> None:
        cols = ["t", "s", "i"]
        data = [self.t, self.s, self.i]
        if full:
            names = self.model.column_names()[1:]
            cols += names
            data += [self.y[:, 1 + k] for k in range(len(names))]
        _write_csv(path, cols, np.column_stack(data))


def ebcm_initial_condition(params: ReducedParams, eps: float) -> np.ndarray:
    return EBCM(params).initial_condition(eps)


def ebcm_rhs(y, params: ReducedParams) -> np.ndarray:
    return EBCM(params).rhs(0.0, y)


def recover_s(y, params: ReducedParams) -> float:
    return EBCM(params).recover_s(y)
