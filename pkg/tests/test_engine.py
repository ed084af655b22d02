import math

import numpy as np
import pytest
from scipy import stats

from hwsir.engine import (EpidemicParams, Exponential, Extinct, Fixed, Gamma, Empirical,
                          check_consistency, init_single_seed, init_uniform_seed, simulate, step,
                          total_infection_rate, Trajectory, SUSCEPTIBLE)
from hwsir.ensemble import streams
from hwsir.population import PopulationGraph, build
from hwsir.size_dist import SizeDistribution, default_household, default_workplace

D = SizeDistribution.from_mapping


def singleton_graph(K):
    return PopulationGraph.from_groups(K, [[j] for j in range(K)], [[j] for j in range(K)])


@pytest.fixture(scope="module")
def graph():
    return build(2000, default_household(), default_workplace(), np.random.default_rng(1))


def params(bG=0.125, lH=1.5, lW=0.00115, nu=None):
    return EpidemicParams(bG, lH, lW, nu or Exponential(0.125))


def test_laws_validate():
    with pytest.raises(ValueError):
        Exponential(0)
    with pytest.raises(ValueError):
        Fixed(-1)
    with pytest.raises(ValueError):
        EpidemicParams(-0.1, 0, 0)
    rng = np.random.default_rng(0)
    assert Gamma(2, 3).sample(rng, 10).shape == (10,)
    assert set(Empirical((1.0, 2.0)).sample(rng, 20)) <= {1.0, 2.0}


def test_uniform_seed_extremes(graph, rng):
    st = init_uniform_seed(graph, params(), 0.0, rng)
    assert st.I == 0 and st.S == graph.K
    st = init_uniform_seed(graph, params(), 1.0, rng)
    assert st.S == 0 and st.I == graph.K
    with pytest.raises(ValueError):
        init_uniform_seed(graph, params(), 1.5, rng)


def test_uniform_seed_count_and_periods():
    g = build(10 ** 4, default_household(), default_workplace(), np.random.default_rng(2))
    gamma = 0.125
    means = []
    for _, d in streams(4, 40):
        st = init_uniform_seed(g, params(), 0.01, d)
        assert st.I == 100
        means.append(st.remaining_periods().mean())
    # pooled mean of 4000 Exp(gamma) draws
    sigma = (1 / gamma) / math.sqrt(4000)
    assert abs(np.mean(means) - 1 / gamma) <= 3 * sigma


def test_round_half_to_even():
    g = singleton_graph(10)
    assert init_uniform_seed(g, params(), 0.25, np.random.default_rng(0)).I == 2  # 2.5 -> 2
    assert init_uniform_seed(g, params(), 0.35, np.random.default_rng(0)).I == 4  # 3.5 -> 4


def test_single_seed(graph, rng):
    st = init_single_seed(singleton_graph(1), params(), rng)
    assert st.I == 1 and st.S == 0
    st = init_single_seed(graph, params(), rng)
    assert st.I == 1 and st.S == graph.K - 1


def test_single_seed_uniform():
    K = 20
    g = singleton_graph(K)
    rng = np.random.default_rng(11)
    counts = np.zeros(K)
    for _ in range(10 ** 5):
        st = init_single_seed(g, params(), rng)
        counts[st._queue[0][2]] += 1
    assert stats.chisquare(counts).pvalue > 0.01


def test_rates():
    g = PopulationGraph.from_groups(3, [[0, 1, 2]], [[0], [1], [2]])
    p = EpidemicParams(0.0, 1.0, 0.0)
    st = init_uniform_seed(g, p, 0.0, np.random.default_rng(0))
    st.infect(0, p.nu, np.random.default_rng(0))
    assert total_infection_rate(st, p) == (0.0, 2.0, 0.0)
    # global: beta_G S I / K
    g = singleton_graph(100)
    p = EpidemicParams(0.125, 0, 0)
    st = init_uniform_seed(g, p, 0.1, np.random.default_rng(0))
    for j in [j for j in range(100) if st.status[j] == SUSCEPTIBLE][:40]:
        st.status[j] = 2  # pretend recovered; only S, I enter the rate
        st.S -= 1
    assert total_infection_rate(st, p)[0] == pytest.approx(0.125 * 50 * 10 / 100)
    st = init_uniform_seed(g, p, 0.0, np.random.default_rng(0))
    assert total_infection_rate(st, p) == (0.0, 0.0, 0.0)


def test_only_recovery_when_no_susceptibles(rng):
    g = singleton_graph(1)
    p = params(nu=Fixed(3.0))
    st = init_single_seed(g, p, rng)
    ev = step(st, p, rng)
    assert ev.kind == "recovery" and ev.t == 3.0
    with pytest.raises(Extinct):
        step(st, p, rng)


def test_pure_death_process(graph):
    p = EpidemicParams(0, 0, 0, Exponential(0.5))
    rng = np.random.default_rng(3)
    st = init_uniform_seed(graph, p, 0.05, rng)
    times = sorted(st.recovery_time[j] for j in st.infected_individuals())
    tr = simulate(st, p, 1e9, rng, record_events=True)
    assert [e.t for e in tr.events] == times
    assert all(e.kind == "recovery" for e in tr.events)


def test_competing_exponentials_two_households():
    # households {0,1}, {2,3}; singleton workplaces; seed in household 0
    g = PopulationGraph.from_groups(4, [[0, 1], [2, 3]], [[0], [1], [2], [3]])
    p = EpidemicParams(0.0, 1.0, 0.0, Exponential(1.0))
    rng = np.random.default_rng(21)
    n = 10 ** 5
    hits = 0
    for _ in range(n):
        st = init_uniform_seed(g, p, 0.0, rng)
        st.infect(0, p.nu, rng)
        ev = step(st, p, rng)
        hits += ev.kind == "infection"
    assert abs(hits / n - 0.5) <= 3 * math.sqrt(0.25 / n)


def test_zero_horizon_and_no_infected(graph, rng):
    p = params()
    st = init_uniform_seed(graph, p, 0.05, rng)
    tr = simulate(st, p, 0.0, rng, grid=[0.0])
    assert tr.t.tolist() == [0.0] and tr.I[0] == st.I
    st = init_uniform_seed(graph, p, 0.0, rng)
    tr = simulate(st, p, 50.0, rng)
    assert np.all(tr.S == graph.K) and np.all(tr.I == 0)


def test_monotone_and_consistent(graph):
    p = params()
    rng = np.random.default_rng(8)
    st = init_uniform_seed(graph, p, 0.01, rng)
    bad = []
    tr = simulate(st, p, 200, rng, every_event=True,
                  observers=[lambda s, e: bad.append(e) if not check_consistency(s) else None])
    assert not bad
    assert np.all(np.diff(tr.S) <= 0) and np.all(np.diff(tr.R) >= 0)
    for c in (tr.cumG, tr.cumH, tr.cumW):
        assert np.all(np.diff(c) >= 0)
    assert np.all(tr.S + tr.I + tr.R == graph.K)


def test_consistency_negative_control(graph, rng):
    p = params()
    st = init_uniform_seed(graph, p, 0.02, rng)
    assert check_consistency(st).ok
    st.s_H[3] += 1
    rep = check_consistency(st)
    assert not rep.ok and 3 in rep.diffs["s_H"]


def test_fixed_period_recoveries_exact(graph):
    c = 4.25
    p = params(nu=Fixed(c))
    rng = np.random.default_rng(5)
    st = init_uniform_seed(graph, p, 0.01, rng)
    seeds = st.infected_individuals()
    tr = simulate(st, p, 1e9, rng, record_events=True)
    infected_at = {j: 0.0 for j in seeds}
    for ev in tr.events:
        if ev.kind == "infection":
            infected_at[ev.individual] = ev.t
        else:
            assert ev.t == infected_at.pop(ev.individual) + c
    assert not infected_at


def test_remaining_periods_memoryless():
    g = build(3000, default_household(), default_workplace(), np.random.default_rng(6))
    p = params()
    pooled = []
    for _, d in streams(7, 20):
        st = init_uniform_seed(g, p, 0.01, d)
        simulate(st, p, 15.0, d)
        pooled.extend(st.remaining_periods())
    assert len(pooled) >= 1000
    assert stats.kstest(pooled, "expon", args=(0, 8.0)).pvalue > 0.01


def test_markovian_path_matches_event_queue_path():
    K = 100
    g = build(K, default_household(), D({1: 0.2, 3: 0.4, 6: 0.4}), np.random.default_rng(0))
    p = EpidemicParams(0.1, 0.4, 0.2, Exponential(0.25))
    finals = {}
    for markov in (False, True):
        out = []
        for _, d in streams(100 + markov, 1000):
            st = init_uniform_seed(g, p, 0.03, d, markovian=markov)
            simulate(st, p, 1e9, d, grid=[0.0])
            out.append(st.R)
        finals[markov] = out
    assert stats.ks_2samp(finals[False], finals[True]).pvalue > 0.01


def test_markovian_requires_exponential(graph, rng):
    with pytest.raises(ValueError):
        init_uniform_seed(graph, params(nu=Fixed(1.0)), 0.01, rng, markovian=True)


def test_trajectory_csv_round_trip(graph, tmp_path):
    p = params()
    rng = np.random.default_rng(9)
    st = init_uniform_seed(graph, p, 0.01, rng)
    tr = simulate(st, p, 40, rng, grid=np.linspace(0, 40, 17) + 1 / 3, record_events=True,
                  record_structures=True)
    tr.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,S,I,R,cumG,cumH,cumW"
    back = Trajectory.from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.table(), tr.table())
    tr.structures_to_csv(tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().startswith("t,layer,S,I,count\n")
    tr.events_to_jsonl(tmp_path / "e.jsonl")
    import json
    first = json.loads((tmp_path / "e.jsonl").read_text().splitlines()[0])
    assert set(first) == {"t", "kind", "layer", "individual", "household", "workplace"}


def test_structure_counts_consistent(graph, rng):
    p = params()
    st = init_uniform_seed(graph, p, 0.1, rng)
    simulate(st, p, 5.0, rng)
    for X in "HW":
        c = st.structure_counts(X)
        S, I = np.indices(c.shape)
        assert (S * c).sum() == st.S and (I * c).sum() == st.I
