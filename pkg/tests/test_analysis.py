import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hwsir.analysis import (Curve, StructureHistogram, align_by_threshold, ensemble_mean,
                            infer_initial_condition, layer_proportions, memorylessness_test,
                            sup_distance)
from hwsir.engine import EpidemicParams, Exponential, init_uniform_seed, simulate
from hwsir.ensemble import EnsembleSpec, run_ensemble, streams
from hwsir.errors import EmptySelection, InsufficientSamples
from hwsir.integrator import IntegratorConfig
from hwsir.population import build
from hwsir.reduced import ReducedModel, ReducedParams
from hwsir.size_dist import default_household, default_workplace

SCENARIO = EpidemicParams(0.125, 1.5, 0.00115, Exponential(0.125))


def curve(t, i, s=None):
    t = np.asarray(t, dtype=float)
    i = np.asarray(i, dtype=float)
    return Curve(t, {"i": i, "s": 1 - i if s is None else np.asarray(s, dtype=float)})


# --- alignment -------------------------------------------------------------------

def test_align_zero_shift_at_level():
    out = align_by_threshold([curve([0, 1, 2], [0.005, 0.01, 0.02])], 0.005)
    assert out[0].shift == 0 and np.array_equal(out[0].t, [0, 1, 2])


def test_align_interpolates_and_drops():
    a = curve([0, 1, 2], [0.0, 0.01, 0.03])
    b = curve([0, 1, 2], [0.0, 0.001, 0.0])
    out = align_by_threshold([a, b], 0.02)
    assert len(out) == 1 and out[0].shift == pytest.approx(1.5)
    with pytest.raises(EmptySelection):
        align_by_threshold([b], 0.02)


def test_align_idempotent():
    a = curve(np.linspace(0, 10, 41), np.exp(np.linspace(0, 10, 41)) * 1e-4)
    once = align_by_threshold([a], 0.005)
    twice = align_by_threshold(once, 0.005)
    assert twice[0].shift == pytest.approx(once[0].shift)
    assert np.allclose(twice[0].t, once[0].t, atol=1e-12)


def test_align_extinct_ensemble():
    spec = EnsembleSpec(500, default_household(), default_workplace(),
                        EpidemicParams(0.01, 0.0, 0.0), 50.0, eps=None)
    with pytest.raises(EmptySelection):
        align_by_threshold(run_ensemble(spec, 20, seed=1), 0.05)


def test_alignment_clusters_peaks():
    spec = EnsembleSpec(2000, default_household(), default_workplace(), SCENARIO, 150.0, eps=None,
                        n_grid=601)
    runs = run_ensemble(spec, 50, seed=5)
    aligned = align_by_threshold(runs, 0.005)
    assert 0 < len(aligned) < len(runs)

    def iqr(cs):
        peaks = [c.t[np.argmax(c["i"])] for c in cs]
        q1, q3 = np.percentile(peaks, [25, 75])
        return q3 - q1

    raw = [c for c in map(Curve.of, runs) if c["i"].max() >= 0.005]
    assert len(raw) == len(aligned)
    assert iqr(aligned) < iqr(raw)


# --- ensemble mean ------------------------------------------------------------------

def test_ensemble_mean_examples():
    a = curve([0, 1, 2], [0.1, 0.2, 0.3])
    m = ensemble_mean([a, a, a], [0, 0.5, 2])
    assert np.allclose(m.mean, [0.1, 0.15, 0.3]) and np.allclose(m.stderr, 0, atol=1e-15)
    m = ensemble_mean([curve([0, 1], [0, 0]), curve([0, 1], [1, 1])], [0, 1])
    assert np.all(m.mean == 0.5)
    with pytest.raises(ValueError):
        ensemble_mean([a], [0, 1])


@pytest.mark.slow
def test_stderr_scaling(pi_H, pi_W):
    spec = EnsembleSpec(10 ** 4, pi_H, pi_W, SCENARIO, 40.0, eps=0.01)
    grid = np.linspace(0, 40, 201)
    small = ensemble_mean(run_ensemble(spec, 50, seed=100), grid)
    large = ensemble_mean(run_ensemble(spec, 200, seed=200), grid)
    k = int(np.argmax(large.mean))
    assert small.stderr[k] < 0.05
    assert small.stderr[k] / large.stderr[k] == pytest.approx(2.0, rel=0.3)


# --- layer proportions -----------------------------------------------------------------

def run_events(params, seed=0, K=1000):
    rng = np.random.default_rng(seed)
    g = build(K, default_household(), default_workplace(), rng)
    st_ = init_uniform_seed(g, params, 0.02, rng)
    return simulate(st_, params, 400.0, rng, record_events=True)


def test_layer_proportions_global_only():
    tr = run_events(EpidemicParams(0.4, 0.0, 0.0))
    assert layer_proportions(tr) == (1.0, 0.0, 0.0)


def test_layer_proportions_household_only():
    tr = run_events(EpidemicParams(0.0, 2.0, 0.0))
    pG, pH, pW = layer_proportions(tr)
    assert pG == 0 and pW == 0 and pH == 1


def test_layer_proportions_sum_and_sources_agree():
    tr = run_events(SCENARIO, seed=3)
    p = layer_proportions(tr)
    assert sum(p) == pytest.approx(1.0)
    assert np.allclose(p, layer_proportions(tr.events))
    assert layer_proportions([]) == (0.0, 0.0, 0.0)


# --- distances ------------------------------------------------------------------------

def test_sup_distance_examples():
    a = curve([0, 10], [0.0, 0.0])
    b = curve([0, 5, 10], [0.3, 0.3, 0.3])
    assert sup_distance(a, a) == 0
    assert sup_distance(a, b) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        sup_distance(a, curve([11, 12], [0, 0]))


@given(st.lists(st.lists(st.floats(0, 1), min_size=5, max_size=5), min_size=3, max_size=3))
@settings(max_examples=100, deadline=None)
def test_sup_distance_pseudometric(rows):
    grids = [np.linspace(0, 4, 5), np.array([0, 0.5, 1.5, 3.5, 4.0]), np.array([0, 1, 2.5, 3, 4.0])]
    a, b, c = (curve(g, r) for g, r in zip(grids, rows))
    assert sup_distance(a, b) == sup_distance(b, a)
    assert sup_distance(a, a) == 0
    # the triangle inequality holds on a common grid
    grid = np.union1d(np.union1d(grids[0], grids[1]), grids[2])
    a, b, c = (curve(grid, x.at(grid, "i")) for x in (a, b, c))
    assert sup_distance(a, c) <= sup_distance(a, b) + sup_distance(b, c) + 1e-15


def test_sup_distance_ode_refinement(pi_H, pi_W):
    m = ReducedModel(ReducedParams(0.125, 1.5, 0.00115, 0.125, pi_H, pi_W))
    y0 = m.initial_condition(0.01)
    a = m.solve(y0, 100, config=IntegratorConfig(1e-6, 1e-8))
    b = m.solve(y0, 100, config=IntegratorConfig(1e-9, 1e-11))
    assert sup_distance(a, b) <= 1e-4 and sup_distance(a, b, "s") <= 1e-4


# --- histograms and inference ----------------------------------------------------------------

def test_infer_at_one_over_K():
    K = 300
    g = build(K, default_household(), default_workplace(), np.random.default_rng(0))
    res = infer_initial_condition(g, SCENARIO, 1 / K, 10, seed=2)
    assert res.retained == res.attempted == 10
    h = res.histogram
    assert h.S == K - 1 and h.I == 1 and h.t == 0.0
    assert h.counts_H.sum() == pytest.approx(g.K_H)


def test_infer_empty_selection():
    g = build(300, default_household(), default_workplace(), np.random.default_rng(0))
    with pytest.raises(EmptySelection):
        infer_initial_condition(g, EpidemicParams(0, 0, 0), 0.01, 5, seed=1)


def test_infer_fresh_graphs_and_consistency():
    build_graph = lambda r: build(500, default_household(), default_workplace(), r)
    res = infer_initial_condition(build_graph, SCENARIO, 0.02, 30, seed=4, keep_states=True)
    assert 0 < res.retained <= 30 and len(res.states) == res.retained
    res.histogram.check_consistency()
    assert res.histogram.I >= 10


def test_histogram_json_round_trip(tmp_path):
    g = build(400, default_household(), default_workplace(), np.random.default_rng(0))
    hs = []
    for _, d in streams(3, 4):
        hs.append(StructureHistogram.from_state(init_uniform_seed(g, SCENARIO, 0.1, d)))
    avg = StructureHistogram.average(hs)
    avg.check_consistency()
    assert avg.n_replicates == 4
    avg.to_json(tmp_path / "h.json")
    back = StructureHistogram.from_json(tmp_path / "h.json")
    assert back.S == avg.S and np.array_equal(back.counts_W, avg.counts_W)


# --- memorylessness ------------------------------------------------------------------------

def test_ks_null_calibration():
    rng = np.random.default_rng(0)
    p = [memorylessness_test(rng.exponential(8.0, 600), 0.125).pvalue for _ in range(300)]
    assert stats.kstest(p, "uniform").pvalue > 0.01
    assert np.mean(np.array(p) < 0.01) < 0.03


def test_ks_negative_control():
    res = memorylessness_test(np.full(600, 8.0), 0.125)
    assert res.pvalue < 1e-6 and not res.passes()


def test_ks_insufficient():
    with pytest.raises(InsufficientSamples):
        memorylessness_test(np.ones(499), 0.125)
