"""Independent replicate runs with per-replicate random streams."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import EpidemicParams, init_single_seed, init_uniform_seed, simulate
from .population import build
from .size_dist import SizeDistribution


@dataclass(frozen=True)
class EnsembleSpec:
    K: int
    pi_H: SizeDistribution
    pi_W: SizeDistribution
    params: EpidemicParams
    T: float
    eps: float | None = 0.01  # None: single seed
    markovian: bool = False
    n_grid: int = 201
    record_structures: bool = False


def streams(seed, n: int):
    """One ``(graph_rng, dynamics_rng)`` pair per replicate, derived from ``seed``."""
    out = []
    for ss in np.random.SeedSequence(seed).spawn(n):
        g, d = ss.spawn(2)
        out.append((np.random.default_rng(g), np.random.default_rng(d)))
    return out


def run_replicate(spec: EnsembleSpec, graph_rng, rng, snapshot=None):
    """One replicate: fresh graph, seeding, simulation to ``spec.T``.

    ``snapshot(state)`` is called right after seeding when given; its
    result is returned alongside the trajectory.
    """
    graph = build(spec.K, spec.pi_H, spec.pi_W, graph_rng)
    if spec.eps is None:
        state = init_single_seed(graph, spec.params, rng, markovian=spec.markovian)
    else:
        state = init_uniform_seed(graph, spec.params, spec.eps, rng, markovian=spec.markovian)
    snap = snapshot(state) if snapshot else None
    grid = np.linspace(0.0, spec.T, spec.n_grid)
    traj = simulate(state, spec.params, spec.T, rng, grid=grid,
                    record_structures=spec.record_structures)
    return (traj, snap) if snapshot else traj


def _job(args):
    spec, seq = args
    g, d = seq.spawn(2)
    return run_replicate(spec, np.random.default_rng(g), np.random.default_rng(d))


def run_ensemble(spec: EnsembleSpec, replicates: int, seed=None, n_jobs: int = 1):
    """Trajectories of ``replicates`` independent runs; identical for any ``n_jobs``."""
    seqs = np.random.SeedSequence(seed).spawn(replicates)
    if n_jobs == 1:
        return [_job((spec, s)) for s in seqs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_job, [(spec, s) for s in seqs]))
