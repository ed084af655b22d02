"""Ensemble statistics and model comparison.

Trajectories from any source (stochastic runs, ODE solutions) are reduced
to :class:`Curve` objects: sample times plus named proportion series.
Interpolation is linear in time throughout.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .engine import (EpidemicParams, Extinct, SimulationState, Trajectory, init_single_seed,
                     step)
from .errors import EmptySelection, InsufficientSamples
from .population import PopulationGraph


@dataclass
class Curve:
    t: np.ndarray
    values: dict
    shift: float = 0.0

    def __getitem__(self, name):
        return self.values[name]

    @classmethod
    def of(cls, obj, components=("s", "i")) -> "Curve":
        if isinstance(obj, Curve):
            return obj
        if isinstance(obj, MeanCurve):
            return obj.as_curve()
        return cls(np.asarray(obj.t, dtype=float),
                   {c: np.asarray(getattr(obj, c), dtype=float) for c in components})

    def at(self, grid, component) -> np.ndarray:
        return np.interp(grid, self.t, self.values[component])


def _up_crossing(t, x, level):
    k = np.flatnonzero(x >= level)
    if k.size == 0:
        return None
    k = int(k[0])
    if k == 0:
        return float(t[0])
    t0, t1, x0, x1 = t[k - 1], t[k], x[k - 1], x[k]
    return float(t0 + (level - x0) / (x1 - x0) * (t1 - t0))


def align_by_threshold(trajectories, level: float, component: str = "i") -> list[Curve]:
    """Shift each trajectory so its first up-crossing of ``level`` is at ``t = 0``.

    Trajectories that never reach ``level`` are dropped.
    """
    out = []
    for tr in trajectories:
        c = Curve.of(tr)
        tc = _up_crossing(c.t, c.values[component], level)
        if tc is None:
            continue
        out.append(Curve(c.t - tc, dict(c.values), c.shift + tc))
    if not out:
        raise EmptySelection(f"no trajectory reaches {component} >= {level}")
    return out


@dataclass
class MeanCurve:
    t: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n: int
    component: str = "i"

    def as_curve(self) -> Curve:
        return Curve(self.t, {self.component: self.mean})


def ensemble_mean(curves, grid, component: str = "i") -> MeanCurve:
    """Pointwise mean and standard error on ``grid``.

    Each curve is held constant beyond its own sample range.
    """
    curves = [Curve.of(c) for c in curves]
    if len(curves) < 2:
        raise ValueError("need at least two trajectories")
    grid = np.asarray(grid, dtype=float)
    vals = np.array([c.at(grid, component) for c in curves])
    se = vals.std(axis=0, ddof=1) / math.sqrt(len(curves))
    return MeanCurve(grid, vals.mean(axis=0), se, len(curves), component)


def layer_proportions(source) -> tuple[float, float, float]:
    """Fractions ``(p_G, p_H, p_W)`` of infections per layer."""
    if isinstance(source, Trajectory):
        counts = np.array([source.cumG[-1], source.cumH[-1], source.cumW[-1]], dtype=float)
    else:
        counts = np.zeros(3)
        for ev in source:
            if ev.kind == "infection" and ev.layer is not None:
                counts["GHW".index(ev.layer)] += 1
    total = counts.sum()
    if total == 0:
        return (0.0, 0.0, 0.0)
    p = counts / total
    return float(p[0]), float(p[1]), float(p[2])


def sup_distance(a, b, component: str = "i") -> float:
    """Sup of ``|a - b|`` over the union of both sample grids within the overlap."""
    a = Curve.of(a, (component,))
    b = Curve.of(b, (component,))
    lo = max(a.t[0], b.t[0])
    hi = min(a.t[-1], b.t[-1])
    if lo > hi:
        raise ValueError("curves do not overlap in time")
    grid = np.union1d(a.t, b.t)
    grid = grid[(grid >= lo) & (grid <= hi)]
    return float(np.max(np.abs(a.at(grid, component) - b.at(grid, component))))


# --- structure-composition histograms ---------------------------------------------

def _pad(grid, n):
    out = np.zeros((n, n))
    out[: grid.shape[0], : grid.shape[1]] = grid
    return out


@dataclass
class StructureHistogram:
    """Counts of structures by (susceptible, infected) composition, per layer.

    ``counts_H[S, I]`` is the number of households holding S susceptible and
    I infected members. When averaged over replicates every field is the
    replicate mean, so linear consistency relations are preserved.
    """

    S: float
    I: float
    K: float
    counts_H: np.ndarray
    counts_W: np.ndarray
    K_H: float
    K_W: float
    n_replicates: int = 1
    t: float = 0.0

    @classmethod
    def from_state(cls, state: SimulationState) -> "StructureHistogram":
        return cls(float(state.S), float(state.I), float(state.K),
                   state.structure_counts("H").astype(float),
                   state.structure_counts("W").astype(float),
                   float(state.graph.K_H), float(state.graph.K_W), 1, state.t)

    def check_consistency(self, tol: float = 1e-9) -> None:
        for X, counts, KX in (("H", self.counts_H, self.K_H), ("W", self.counts_W, self.K_W)):
            Sg, Ig = np.indices(counts.shape)
            for name, total, want in (("S", (Sg * counts).sum(), self.S),
                                      ("I", (Ig * counts).sum(), self.I)):
                if abs(total - want) > tol * max(1.0, self.K):
                    raise ValueError(f"layer {X}: {name} summed over structures is {total}, "
                                     f"expected {want}")
            if counts.sum() > KX * (1 + tol):
                raise ValueError(f"layer {X}: more structures counted than exist")

    @classmethod
    def average(cls, hists) -> "StructureHistogram":
        hists = list(hists)
        if not hists:
            raise EmptySelection("nothing to average")
        nH = max(h.counts_H.shape[0] for h in hists)
        nW = max(h.counts_W.shape[0] for h in hists)
        return cls(float(np.mean([h.S for h in hists])), float(np.mean([h.I for h in hists])),
                   float(np.mean([h.K for h in hists])),
                   np.mean([_pad(h.counts_H, nH) for h in hists], axis=0),
                   np.mean([_pad(h.counts_W, nW) for h in hists], axis=0),
                   float(np.mean([h.K_H for h in hists])), float(np.mean([h.K_W for h in hists])),
                   sum(h.n_replicates for h in hists),
                   float(np.mean([h.t for h in hists])))

    def to_json(self, path) -> None:
        doc = {"S": self.S, "I": self.I, "K": self.K, "K_H": self.K_H, "K_W": self.K_W,
               "n_replicates": self.n_replicates, "t": self.t,
               "counts_H": self.counts_H.tolist(), "counts_W": self.counts_W.tolist()}
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def from_json(cls, path) -> "StructureHistogram":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(doc["S"], doc["I"], doc["K"], np.array(doc["counts_H"], dtype=float),
                   np.array(doc["counts_W"], dtype=float), doc["K_H"], doc["K_W"],
                   doc["n_replicates"], doc.get("t", 0.0))


@dataclass
class InferenceResult:
    histogram: StructureHistogram
    retained: int
    attempted: int
    states: list = field(default_factory=list, repr=False)


def run_to_level(state: SimulationState, params: EpidemicParams, rng, level: float) -> bool:
    """Step until the infected proportion reaches ``level``; False on extinction."""
    target = math.ceil(level * state.K - 1e-9)
    while state.I < target:
        try:
            step(state, params, rng)
        except Extinct:
            return False
    return True


def infer_initial_condition(graph, params: EpidemicParams, stop_level: float, replicates: int,
                            seed=None, keep_states: bool = False) -> InferenceResult:
    """Average structure composition at the moment single-seed epidemics reach ``stop_level``.

    ``graph`` is either a fixed :class:`PopulationGraph` or a callable
    ``rng -> PopulationGraph`` building a fresh graph per replicate.
    Replicates whose infected count hits 0 first are discarded.
    """
    children = np.random.SeedSequence(seed).spawn(replicates)
    hists, states = [], []
    for ss in children:
        g_ss, d_ss = ss.spawn(2)
        g = graph if isinstance(graph, PopulationGraph) else graph(np.random.default_rng(g_ss))
        rng = np.random.default_rng(d_ss)
        state = init_single_seed(g, params, rng)
        if not run_to_level(state, params, rng, stop_level):
            continue
        hists.append(StructureHistogram.from_state(state))
        if keep_states:
            states.append((state, rng))
    if not hists:
        raise EmptySelection("every replicate went extinct before reaching the stop level")
    return InferenceResult(StructureHistogram.average(hists), len(hists), replicates, states)


# --- memorylessness -------------------------------------------------------------------

@dataclass
class KSResult:
    statistic: float
    pvalue: float
    n: int

    def passes(self, alpha: float = 0.01) -> bool:
        return self.pvalue >= alpha


def memorylessness_test(samples, gamma: float, min_samples: int = 500) -> KSResult:
    """One-sample Kolmogorov-Smirnov test of remaining periods against Exponential(gamma)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < min_samples:
        raise InsufficientSamples(f"{x.size} samples, need at least {min_samples}")
    res = stats.kstest(x, "expon", args=(0.0, 1.0 / gamma))
    return KSResult(float(res.statistic), float(res.pvalue), int(x.size))
