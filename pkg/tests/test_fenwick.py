import numpy as np
import pytest
from hypothesis import given, strategies as st

from hwsir.fenwick import FenwickSampler


@given(st.lists(st.integers(0, 50), min_size=1, max_size=40), st.data())
def test_find_matches_linear_scan(weights, data):
    f = FenwickSampler(weights)
    assert f.total == sum(weights)
    for i in range(len(weights) + 1):
        assert f.prefix(i) == sum(weights[:i])
    if f.total:
        r = data.draw(st.integers(0, f.total - 1))
        cum = np.cumsum(weights)
        assert f.find(r) == int(np.searchsorted(cum, r, side="right"))


@given(st.lists(st.integers(0, 20), min_size=1, max_size=30),
       st.lists(st.tuples(st.integers(0, 29), st.integers(0, 20)), max_size=30))
def test_updates(weights, updates):
    f = FenwickSampler(weights)
    w = list(weights)
    for i, v in updates:
        i %= len(w)
        f.set(i, v)
        w[i] = v
    assert f.total == sum(w)
    assert [f[i] for i in range(len(w))] == w
    assert [f.prefix(i) for i in range(len(w) + 1)] == np.concatenate([[0], np.cumsum(w)]).tolist()


def test_sampling_frequencies():
    w = [0, 3, 1, 0, 6]
    f = FenwickSampler(w)
    rng = np.random.default_rng(0)
    n = 60000
    counts = np.bincount([f.sample(rng) for _ in range(n)], minlength=5)
    p = np.array(w) / 10
    assert counts[0] == counts[3] == 0
    assert np.all(np.abs(counts / n - p) <= 4 * np.sqrt(p * (1 - p) / n) + 1e-12)


def test_find_out_of_range():
    f = FenwickSampler([1, 2])
    with pytest.raises(ValueError):
        f.find(3)
