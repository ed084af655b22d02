"""Exact event-driven simulation of the household-workplace SIR process.

Infections are Markovian given the current state and recoveries are
scheduled when an individual is infected, so racing an exponential clock
for the pooled infection rate against the earliest scheduled recovery is
exact for any infectious-period law. With an exponential law the engine
can instead treat recovery as a rate ``gamma * I`` channel (``markovian=True``).
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import Extinct
from .fenwick import FenwickSampler
from .population import PopulationGraph

SUSCEPTIBLE, INFECTED, RECOVERED = 0, 1, 2


# --- infectious-period laws -------------------------------------------------

@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    @property
    def mean(self):
        return 1.0 / self.rate


@dataclass(frozen=True)
class Fixed:
    """Deterministic duration; for exactness tests of the engine only."""

    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    def sample(self, rng, size=None):
        if size is None:
            return self.duration
        return np.full(size, self.duration)

    @property
    def mean(self):
        return self.duration


@dataclass(frozen=True)
class Gamma:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("gamma shape and scale must be positive")

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, self.scale, size)

    @property
    def mean(self):
        return self.shape * self.scale


@dataclass(frozen=True)
class Empirical:
    samples: tuple

    def __post_init__(self):
        if len(self.samples) == 0 or min(self.samples) <= 0:
            raise ValueError("empirical durations must be positive")

    def sample(self, rng, size=None):
        return rng.choice(np.asarray(self.samples, dtype=float), size)

    @property
    def mean(self):
        return float(np.mean(self.samples))


@dataclass(frozen=True)
class EpidemicParams:
    beta_G: float
    lambda_H: float
    lambda_W: float
    nu: object = field(default_factory=lambda: Exponential(0.125))

    def __post_init__(self):
        if min(self.beta_G, self.lambda_H, self.lambda_W) < 0:
            raise ValueError("contact rates must be non-negative")

    @property
    def gamma(self) -> float:
        if not isinstance(self.nu, Exponential):
            raise ValueError("gamma is only defined for an exponential infectious period")
        return self.nu.rate


# --- events and state ---------------------------------------------------------

@dataclass
class Event:
    t: float
    kind: str  # "infection" | "recovery"
    layer: str | None  # "G", "H", "W" for infections
    individual: int
    household: int
    workplace: int

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "kind": self.kind, "layer": self.layer,
                           "individual": self.individual, "household": self.household,
                           "workplace": self.workplace})


class SimulationState:
    """Mutable epidemic state on a fixed population graph.

    Per-structure susceptible/infected counts are cached, and integer
    Fenwick samplers index ``s_k`` and ``s_k * i_k`` per household and
    workplace so that their totals are the layer aggregates.
    """

    def __init__(self, graph: PopulationGraph, markovian: bool = False):
        self.graph = graph
        self.K = graph.K
        self.markovian = markovian
        self.t = 0.0
        self.status = [SUSCEPTIBLE] * self.K
        self.recovery_time = [math.inf] * self.K
        self.hh_of = graph.household_of.tolist()
        self.wp_of = graph.workplace_of.tolist()
        self.hh_members = [g.tolist() for g in graph.household_members]
        self.wp_members = [g.tolist() for g in graph.workplace_members]
        self.s_H = [len(g) for g in self.hh_members]
        self.i_H = [0] * graph.K_H
        self.s_W = [len(g) for g in self.wp_members]
        self.i_W = [0] * graph.K_W
        self.sus_H = FenwickSampler(self.s_H)
        self.sus_W = FenwickSampler(self.s_W)
        self.pair_H = FenwickSampler([0] * graph.K_H)
        self.pair_W = FenwickSampler([0] * graph.K_W)
        self.S = self.K
        self.I = 0
        self.R = 0
        self.cum = {"G": 0, "H": 0, "W": 0}
        self._queue: list = []  # (time, seq, individual)
        self._seq = 0
        self._infected: list = []  # markovian path: infected pool
        self._pos: dict = {}

    # aggregates
    @property
    def A_H(self) -> int:
        return self.pair_H.total

    @property
    def A_W(self) -> int:
        return self.pair_W.total

    def infected_individuals(self) -> list[int]:
        return [j for j, st in enumerate(self.status) if st == INFECTED]

    def remaining_periods(self) -> np.ndarray:
        """Scheduled recovery time minus clock, for every infected individual."""
        return np.array([self.recovery_time[j] - self.t for j in self.infected_individuals()])

    def next_recovery(self) -> float:
        if self.markovian:
            return math.inf
        return self._queue[0][0] if self._queue else math.inf

    # transitions
    def infect(self, j: int, nu, rng, layer: str | None = None) -> None:
        if self.status[j] != SUSCEPTIBLE:
            raise ValueError(f"individual {j} is not susceptible")
        self.status[j] = INFECTED
        h, w = self.hh_of[j], self.wp_of[j]
        sh, ih = self.s_H[h] - 1, self.i_H[h] + 1
        self.s_H[h], self.i_H[h] = sh, ih
        self.sus_H.add(h, -1)
        self.pair_H.set(h, sh * ih)
        sw, iw = self.s_W[w] - 1, self.i_W[w] + 1
        self.s_W[w], self.i_W[w] = sw, iw
        self.sus_W.add(w, -1)
        self.pair_W.set(w, sw * iw)
        self.S -= 1
        self.I += 1
        if layer is not None:
            self.cum[layer] += 1
        if self.markovian:
            self._pos[j] = len(self._infected)
            self._infected.append(j)
        else:
            rt = self.t + float(nu.sample(rng))
            self.recovery_time[j] = rt
            heapq.heappush(self._queue, (rt, self._seq, j))
            self._seq += 1

    def recover(self, j: int) -> None:
        if self.status[j] != INFECTED:
            raise ValueError(f"individual {j} is not infected")
        self.status[j] = RECOVERED
        self.recovery_time[j] = math.inf
        h, w = self.hh_of[j], self.wp_of[j]
        self.i_H[h] -= 1
        self.pair_H.set(h, self.s_H[h] * self.i_H[h])
        self.i_W[w] -= 1
        self.pair_W.set(w, self.s_W[w] * self.i_W[w])
        self.I -= 1
        self.R += 1
        if self.markovian:
            k = self._pos.pop(j)
            last = self._infected.pop()
            if last != j:
                self._infected[k] = last
                self._pos[last] = k

    def _susceptible_member(self, members, rng) -> int:
        status = self.status
        sus = [m for m in members if status[m] == SUSCEPTIBLE]
        return sus[int(rng.integers(len(sus)))]

    # snapshots
    def structure_counts(self, layer: str) -> np.ndarray:
        """``counts[S, I]``: number of structures with S susceptible and I infected."""
        s = np.asarray(self.s_H if layer == "H" else self.s_W)
        i = np.asarray(self.i_H if layer == "H" else self.i_W)
        n = int((s + i).max()) if s.size else 0
        n = max(n, int(self.graph.sizes(layer).max()))
        counts = np.zeros((n + 1, n + 1), dtype=np.int64)
        np.add.at(counts, (s, i), 1)
        return counts

    def copy(self) -> "SimulationState":
        import copy
        return copy.deepcopy(self)


# --- initialisation -----------------------------------------------------------

def _seed(graph, params, chosen, rng, markovian) -> SimulationState:
    if markovian and not isinstance(params.nu, Exponential):
        raise ValueError("the Markovian path requires an exponential infectious period")
    state = SimulationState(graph, markovian=markovian)
    for j in chosen:
        state.infect(int(j), params.nu, rng)
    return state


def init_uniform_seed(graph: PopulationGraph, params: EpidemicParams, eps: float, rng,
                      markovian: bool = False) -> SimulationState:
    """Infect ``round(eps * K)`` uniformly chosen individuals at time 0.

    Python's ``round`` is half-to-even. Each seed gets an independent
    infectious period drawn from ``params.nu``.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"seed fraction {eps} outside [0, 1]")
    n0 = round(eps * graph.K)
    chosen = rng.choice(graph.K, size=n0, replace=False) if n0 else []
    return _seed(graph, params, chosen, rng, markovian)


def init_single_seed(graph: PopulationGraph, params: EpidemicParams, rng,
                     markovian: bool = False) -> SimulationState:
    return _seed(graph, params, [int(rng.integers(graph.K))], rng, markovian)


# --- dynamics -------------------------------------------------------------------

def total_infection_rate(state: SimulationState, params: EpidemicParams):
    """Per-layer infection rates ``(rate_G, rate_H, rate_W)``."""
    rate_G = params.beta_G * state.S * state.I / state.K
    return rate_G, params.lambda_H * state.A_H, params.lambda_W * state.A_W


def step(state: SimulationState, params: EpidemicParams, rng, horizon: float = math.inf):
    """Execute the next event and return it.

    Returns ``None`` without changing anything except the clock (set to
    ``horizon``) when the next event would occur after ``horizon``; the
    discarded infection candidate is harmless because infection clocks are
    memoryless. Raises :class:`Extinct` when no one is infected.
    """
    if state.I == 0:
        raise Extinct()
    rG, rH, rW = total_infection_rate(state, params)
    r_inf = rG + rH + rW
    if state.markovian:
        r_rec = params.nu.rate * state.I
        total = r_inf + r_rec
        t_ev = state.t + rng.exponential(1.0 / total)
        if t_ev > horizon:
            state.t = horizon
            return None
        state.t = t_ev
        u = rng.random() * total
        if u < r_rec:
            j = state._infected[int(rng.integers(state.I))]
            state.recover(j)
            return Event(t_ev, "recovery", None, j, state.hh_of[j], state.wp_of[j])
        u -= r_rec
    else:
        t_inf = state.t + rng.exponential(1.0 / r_inf) if r_inf > 0 else math.inf
        t_rec = state._queue[0][0]
        if t_rec <= t_inf:
            if t_rec > horizon:
                state.t = horizon
                return None
            _, _, j = heapq.heappop(state._queue)
            state.t = t_rec
            state.recover(j)
            return Event(t_rec, "recovery", None, j, state.hh_of[j], state.wp_of[j])
        if t_inf > horizon:
            state.t = horizon
            return None
        t_ev = t_inf
        state.t = t_ev
        u = rng.random() * r_inf
    # infection channel
    if u < rG:
        layer = "G"
        h = state.sus_H.sample(rng)
        j = state._susceptible_member(state.hh_members[h], rng)
    elif u < rG + rH or rW == 0:
        layer = "H"
        h = state.pair_H.sample(rng)
        j = state._susceptible_member(state.hh_members[h], rng)
    else:
        layer = "W"
        w = state.pair_W.sample(rng)
        j = state._susceptible_member(state.wp_members[w], rng)
    state.infect(j, params.nu, rng, layer)
    return Event(t_ev, "infection", layer, j, state.hh_of[j], state.wp_of[j])


# --- trajectories -------------------------------------------------------------------

@dataclass
class Trajectory:
    K: int
    t: np.ndarray
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    cumG: np.ndarray
    cumH: np.ndarray
    cumW: np.ndarray
    structures: dict | None = None  # layer -> list of counts[S, I] per sample
    events: list | None = None
    extinct: bool = False

    COLUMNS = ("t", "S", "I", "R", "cumG", "cumH", "cumW")

    @property
    def s(self) -> np.ndarray:
        return self.S / self.K

    @property
    def i(self) -> np.ndarray:
        return self.I / self.K

    @property
    def r(self) -> np.ndarray:
        return self.R / self.K

    def table(self) -> np.ndarray:
        return np.column_stack([self.t, self.S, self.I, self.R, self.cumG, self.cumH, self.cumW])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for row in zip(self.t, self.S, self.I, self.R, self.cumG, self.cumH, self.cumW):
                fh.write(f"{float(row[0])!r}," + ",".join(str(int(v)) for v in row[1:]) + "\n")

    @classmethod
    def from_csv(cls, path, K: int | None = None) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        cols = [data[:, 0]] + [data[:, k].astype(np.int64) for k in range(1, 7)]
        if K is None:
            K = int(cols[1][0] + cols[2][0] + cols[3][0])
        return cls(K, *cols)

    def structures_to_csv(self, path) -> None:
        if not self.structures:
            raise ValueError("trajectory carries no structure histograms")
        with open(path, "w") as fh:
            fh.write("t,layer,S,I,count\n")
            for layer in ("H", "W"):
                for t, counts in zip(self.t, self.structures[layer]):
                    for S, I in zip(*np.nonzero(counts)):
                        fh.write(f"{t!r},{layer},{S},{I},{counts[S, I]}\n")

    def events_to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for ev in self.events or []:
                fh.write(ev.to_json() + "\n")


def simulate(state: SimulationState, params: EpidemicParams, T: float, rng,
             grid: Iterable[float] | None = None, observers: Iterable[Callable] = (),
             record_events: bool = False, every_event: bool = False,
             record_structures: bool = False,
             stop: Callable[[SimulationState], bool] | None = None) -> Trajectory:
    """Run events up to time ``T`` (or extinction, or until ``stop(state)``).

    The trajectory is sampled at ``grid`` (default: 101 points on ``[t, T]``):
    the value at a grid time is the state after the last event at or before
    it. ``every_event`` adds a sample after every event. Each observer is
    called as ``observer(state, event)`` after every event.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    if grid is None:
        grid = np.linspace(state.t, max(T, state.t), 101)
    grid = np.asarray(sorted(grid), dtype=float)
    rows = []
    hists = {"H": [], "W": []} if record_structures else None
    events = [] if record_events else None
    observers = list(observers)
    g = 0

    def record(t):
        rows.append((t, state.S, state.I, state.R, state.cum["G"], state.cum["H"], state.cum["W"]))
        if hists is not None:
            hists["H"].append(state.structure_counts("H"))
            hists["W"].append(state.structure_counts("W"))

    extinct = False
    while True:
        try:
            ev = step(state, params, rng, horizon=T)
        except Extinct:
            extinct = True
            break
        if ev is None:
            break
        while g < grid.size and grid[g] < ev.t:
            record(grid[g])
            g += 1
        if every_event:
            record(ev.t)
        if events is not None:
            events.append(ev)
        for obs in observers:
            obs(state, ev)
        if stop is not None and stop(state):
            break
    while g < grid.size and grid[g] <= max(state.t, T if extinct else state.t):
        record(grid[g])
        g += 1
    arr = np.array(rows, dtype=float).reshape(-1, 7)
    t = arr[:, 0]
    order = np.argsort(t, kind="stable")
    arr = arr[order]
    if hists is not None:
        hists = {k: [v[o] for o in order] for k, v in hists.items()}
    ints = [arr[:, k].astype(np.int64) for k in range(1, 7)]
    return Trajectory(state.K, arr[:, 0], *ints, structures=hists, events=events, extinct=extinct)


# --- consistency -------------------------------------------------------------------

@dataclass
class ConsistencyReport:
    ok: bool
    diffs: dict

    def __bool__(self):
        return self.ok


def check_consistency(state: SimulationState) -> ConsistencyReport:
    """Recompute every cached aggregate from individual statuses and compare."""
    st = np.asarray(state.status)
    hh = state.graph.household_of
    wp = state.graph.workplace_of
    sus = (st == SUSCEPTIBLE).astype(np.int64)
    inf = (st == INFECTED).astype(np.int64)
    S, I, R = int(sus.sum()), int(inf.sum()), int((st == RECOVERED).sum())
    s_H = np.bincount(hh, weights=sus, minlength=state.graph.K_H).astype(np.int64)
    i_H = np.bincount(hh, weights=inf, minlength=state.graph.K_H).astype(np.int64)
    s_W = np.bincount(wp, weights=sus, minlength=state.graph.K_W).astype(np.int64)
    i_W = np.bincount(wp, weights=inf, minlength=state.graph.K_W).astype(np.int64)
    diffs = {}

    def cmp(name, cached, fresh):
        if np.ndim(fresh) == 0:
            if cached != fresh:
                diffs[name] = (cached, fresh)
        else:
            bad = np.flatnonzero(np.asarray(cached) != fresh)
            if bad.size:
                diffs[name] = {int(k): (np.asarray(cached)[k], fresh[k]) for k in bad[:10]}

    cmp("S_total", state.S, S)
    cmp("I_total", state.I, I)
    cmp("R_total", state.R, R)
    cmp("S+I+R", state.S + state.I + state.R, state.K)
    cmp("household_S_sum", int(s_H.sum()), state.S)
    cmp("workplace_S_sum", int(s_W.sum()), state.S)
    cmp("household_I_sum", int(i_H.sum()), state.I)
    cmp("workplace_I_sum", int(i_W.sum()), state.I)
    cmp("s_H", state.s_H, s_H)
    cmp("i_H", state.i_H, i_H)
    cmp("s_W", state.s_W, s_W)
    cmp("i_W", state.i_W, i_W)
    cmp("A_H", state.A_H, int((s_H * i_H).sum()))
    cmp("A_W", state.A_W, int((s_W * i_W).sum()))
    cmp("sus_H_total", state.sus_H.total, S)
    cmp("sus_W_total", state.sus_W.total, S)
    cmp("pair_H", [state.pair_H[k] for k in range(len(state.pair_H))], s_H * i_H)
    cmp("pair_W", [state.pair_W[k] for k in range(len(state.pair_W))], s_W * i_W)
    if not state.markovian:
        cmp("queue_size", len(state._queue), I)
    else:
        cmp("infected_pool", len(state._infected), I)
    return ConsistencyReport(not diffs, diffs)
