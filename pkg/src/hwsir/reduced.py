"""Reduced ODE model for the large-population limit with exponential infectious periods.

State vector layout: ``[s, i, n^H_(S,I) ..., n^W_(S,I) ...]`` with the
composition blocks ordered by :class:`~hwsir.indexing.StateIndexer`.
The right-hand side is assembled from the indexer's arrays rather than
written equation by equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

from .errors import DegenerateState
from .indexing import StateIndexer
from .integrator import IntegratorConfig, integrate
from .size_dist import SizeDistribution

S_FLOOR = 1e-12
DEGENERATE_TOL = 1e-12
# tighter than the integrator defaults so that sampled states stay in V at 1e-8
SOLVE_CONFIG = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)


@dataclass(frozen=True)
class ReducedParams:
    beta_G: float
    lambda_H: float
    lambda_W: float
    gamma: float
    pi_H: SizeDistribution
    pi_W: SizeDistribution

    def __post_init__(self):
        if min(self.beta_G, self.lambda_H, self.lambda_W) < 0:
            raise ValueError("contact rates must be non-negative")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def m_H(self) -> float:
        return self.pi_H.mean()

    @property
    def m_W(self) -> float:
        return self.pi_W.mean()

    def swapped(self) -> "ReducedParams":
        return ReducedParams(self.beta_G, self.lambda_W, self.lambda_H, self.gamma, self.pi_W, self.pi_H)


@dataclass
class _Layer:
    idx: StateIndexer
    lam: float
    m: float
    pi: SizeDistribution
    sl: slice
    S: np.ndarray = field(init=False)
    I: np.ndarray = field(init=False)

    def __post_init__(self):
        self.S = self.idx.S.astype(float)
        self.I = self.idx.I.astype(float)
        self.SI = self.S * self.I
        self.has_pred = self.idx.pred >= 0
        self.has_succ = self.idx.succ >= 0
        self.pred = np.where(self.has_pred, self.idx.pred, 0)
        self.succ = np.where(self.has_succ, self.idx.succ, 0)
        # within-structure rate on the (S + 1, I - 1) inflow
        self.lam_in = self.lam * (self.S + 1) * (self.I - 1) * self.has_pred
        self.pos_11 = self.idx.position(1, 1) if self.idx.n_max >= 2 else None


class ReducedModel:
    """Vector field and helpers for the reduced system at fixed parameters."""

    def __init__(self, params: ReducedParams):
        self.params = params
        nH = max(params.pi_H.n_max, 1)
        nW = max(params.pi_W.n_max, 1)
        self.idx_H = StateIndexer(nH)
        self.idx_W = StateIndexer(nW)
        a = 2
        b = a + len(self.idx_H)
        c = b + len(self.idx_W)
        self.dim = c
        self.H = _Layer(self.idx_H, params.lambda_H, params.m_H, params.pi_H, slice(a, b))
        self.W = _Layer(self.idx_W, params.lambda_W, params.m_W, params.pi_W, slice(b, c))

    # --- layout ---------------------------------------------------------------
    def layer(self, X: str) -> _Layer:
        return self.H if X == "H" else self.W

    def block(self, y: np.ndarray, X: str) -> np.ndarray:
        return y[..., self.layer(X).sl]

    def column_names(self) -> list[str]:
        names = ["s", "i"]
        for X in ("H", "W"):
            names += [f"n{X}_{S}_{I}" for S, I in self.layer(X).idx.states()]
        return names

    # --- fluxes -----------------------------------------------------------------
    def taus(self, y):
        """Per-capita fluxes ``(tau_G, tau_H, tau_W)``."""
        H, W = self.H, self.W
        tau_G = self.params.beta_G * y[1]
        tau_H = H.lam / H.m * np.dot(H.SI, y[H.sl])
        tau_W = W.lam / W.m * np.dot(W.SI, y[W.sl])
        return tau_G, tau_H, tau_W

    def _cross_term(self, L: _Layer, n: np.ndarray, s: float, tau_other: float, S: np.ndarray):
        """``tau_other * S * n / s`` in ratio-safe form, clamped by ``m_X``."""
        if s < S_FLOOR:
            if s <= 0 and tau_other > 0 and np.any(n[S > 0] > DEGENERATE_TOL):
                raise DegenerateState(f"s={s:g} with susceptible-bearing structures present")
            return np.zeros_like(n)
        return tau_other * np.clip(S * n / s, 0.0, L.m)

    def rhs(self, t, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        s, i = y[0], y[1]
        gamma = self.params.gamma
        tau_G, tau_H, tau_W = self.taus(y)
        f = np.empty(self.dim)
        ds = -(tau_H + tau_W + tau_G * s)
        f[0] = ds
        f[1] = -ds - gamma * i
        for L, tau_other in ((self.H, tau_W), (self.W, tau_H)):
            n = y[L.sl]
            cross_out = self._cross_term(L, n, s, tau_other, L.S)
            out = (L.lam * L.SI + tau_G * L.S + gamma * L.I) * n + cross_out
            n_pred = n[L.pred] * L.has_pred
            cross_in = self._cross_term(L, n_pred, s, tau_other, L.S + 1)
            inflow = (L.lam_in + tau_G * (L.S + 1)) * n_pred + cross_in * L.has_pred
            rec_in = gamma * (L.I + 1) * n[L.succ] * L.has_succ
            f[L.sl] = -out + rec_in + inflow
        return f

    def rhs_with_r(self, t, yr) -> np.ndarray:
        """Vector field extended with ``r' = gamma * i`` as a last coordinate."""
        f = np.empty(self.dim + 1)
        f[:-1] = self.rhs(t, yr[:-1])
        f[-1] = self.params.gamma * yr[1]
        return f

    # --- initial conditions -------------------------------------------------------
    def initial_condition(self, eps: float) -> np.ndarray:
        """Uniform seeding of a fraction ``eps``: binomial compositions per structure."""
        if not 0.0 <= eps <= 1.0:
            raise ValueError(f"seed fraction {eps} outside [0, 1]")
        y = np.zeros(self.dim)
        y[0] = 1.0 - eps
        y[1] = eps
        for L in (self.H, self.W):
            S, I = L.idx.S, L.idx.I
            pi_n = np.array([L.pi[k] for k in (S + I)])
            y[L.sl] = comb(S + I, I) * pi_n * (1.0 - eps) ** S * eps ** I
        return y

    def initial_condition_from_counts(self, hist, tol: float = 1e-9) -> np.ndarray:
        """Normalize a structure-composition histogram into a state vector."""
        hist.check_consistency(tol)
        y = np.zeros(self.dim)
        y[0] = hist.S / hist.K
        y[1] = hist.I / hist.K
        y[self.H.sl] = self.idx_H.from_grid(hist.counts_H) / hist.K_H
        y[self.W.sl] = self.idx_W.from_grid(hist.counts_W) / hist.K_W
        return y

    # --- identities and confinement -------------------------------------------------
    def delta(self, y, X: str) -> float:
        L = self.layer(X)
        return L.m * y[0] - np.dot(L.S, y[L.sl])

    def delta_identity_residual(self, y, X: str) -> float:
        """``dDelta/dt`` from the vector field minus its closed form."""
        y = np.asarray(y, dtype=float)
        if not y[0] > 0:
            raise ValueError("requires s > 0")
        L = self.layer(X)
        f = self.rhs(0.0, y)
        d_delta = L.m * f[0] - np.dot(L.S, f[L.sl])
        tau_G, tau_H, tau_W = self.taus(y)
        tau_other = tau_W if X == "H" else tau_H
        n11 = y[L.sl][L.pos_11] if L.pos_11 is not None else 0.0
        closed = self.params.gamma * n11 - (tau_G + tau_other / y[0]) * self.delta(y, X)
        return float(d_delta - closed)

    def check_V(self, y, tol: float = 1e-8) -> "VReport":
        y = np.asarray(y, dtype=float)
        checks = {
            "entries>=0": float(-y.min()),
            "entries<=1": float(y.max() - 1.0),
            "s+i<=1": float(y[0] + y[1] - 1.0),
        }
        for X in ("H", "W"):
            L = self.layer(X)
            checks[f"sum_n{X}<=1"] = float(y[L.sl].sum() - 1.0)
            checks[f"Delta{X}>=0"] = float(-self.delta(y, X))
        return VReport({k: v <= tol for k, v in checks.items()}, checks, tol)

    # --- solving ---------------------------------------------------------------------
    def solve(self, y0, T: float, grid=None, config: IntegratorConfig | None = None,
              with_r: bool = True, r0: float = 0.0):
        """Integrate on ``[0, T]``; returns a :class:`ReducedSolution`."""
        y0 = np.asarray(y0, dtype=float)
        if grid is None:
            grid = np.linspace(0.0, T, 201)
        grid = np.asarray(grid, dtype=float)
        config = config or SOLVE_CONFIG
        if with_r:
            sol, vals = integrate(self.rhs_with_r, np.append(y0, r0), (0.0, T), config, grid)
        else:
            sol, vals = integrate(self.rhs, y0, (0.0, T), config, grid)
        return ReducedSolution(self, grid, vals, sol, with_r)


@dataclass
class VReport:
    passed: dict
    violation: dict
    tol: float

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def __bool__(self):
        return self.ok


@dataclass
class ReducedSolution:
    model: ReducedModel
    t: np.ndarray
    y: np.ndarray  # (len(t), dim [+1])
    dense: object
    with_r: bool

    @property
    def s(self):
        return self.y[:, 0]

    @property
    def i(self):
        return self.y[:, 1]

    @property
    def r(self):
        if not self.with_r:
            raise AttributeError("solution was integrated without r")
        return self.y[:, -1]

    def state(self, k: int) -> np.ndarray:
        return self.y[k, : self.model.dim]

    def to_csv(self, path, full: bool = False) -> None:
        cols = ["t", "s", "i"] + (["r"] if self.with_r else [])
        data = [self.t, self.s, self.i] + ([self.r] if self.with_r else [])
        if full:
            names = self.model.column_names()[2:]
            cols += names
            data += [self.y[:, 2 + k] for k in range(len(names))]
        _write_csv(path, cols, np.column_stack(data))


def _write_csv(path, columns, data) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path) -> dict:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, k] for k, name in enumerate(header)}


# module-level operation names
def initial_condition(params: ReducedParams, eps: float) -> np.ndarray:
    return ReducedModel(params).initial_condition(eps)


def rhs(y, params: ReducedParams) -> np.ndarray:
    return ReducedModel(params).rhs(0.0, y)


def delta_identity_residual(y, params: ReducedParams, layer: str) -> float:
    return ReducedModel(params).delta_identity_residual(y, layer)


def check_V(y, params: ReducedParams, tol: float = 1e-8) -> VReport:
    return ReducedModel(params).check_V(y, tol)


def initial_condition_from_counts(hist, params: ReducedParams) -> np.ndarray:
    return ReducedModel(params).initial_condition_from_counts(hist)
