import numpy as np
import pytest
from scipy import stats

from truncgauss import rng as R
from truncgauss.rng import RandomStream


def test_same_seed_same_stream():
    a, b = RandomStream(42), RandomStream(42)
    assert [a.uniform() for _ in range(5)] == [b.uniform() for _ in range(5)]


def test_seed_range():
    RandomStream(2**64 - 1)
    with pytest.raises(ValueError):
        RandomStream(2**64)
    with pytest.raises(ValueError):
        RandomStream(-1)


def test_spawned_children_are_reproducible_and_distinct():
    k1 = RandomStream(7).spawn(3)
    k2 = RandomStream(7).spawn(3)
    assert k1[1].uniform() == k2[1].uniform()
    assert k1[0].uniform() != k1[2].uniform()


def test_uniform_range_and_distribution():
    s = RandomStream(1)
    u = np.array([s.uniform() for _ in range(20_000)])
    assert u.min() >= 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_uniform_int_is_unbiased():
    s = RandomStream(2)
    v = np.array([s.uniform_int(3, 8) for _ in range(30_000)])
    assert v.min() == 3 and v.max() == 8
    counts = np.bincount(v - 3)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_uniform_int_bad_range():
    s = RandomStream(0)
    with pytest.raises(ValueError):
        s.uniform_int(5, 4)
    with pytest.raises(ValueError):
        s.uniform_int(0, 2**33)


def test_exponential():
    s = RandomStream(3)
    e = np.array([s.exponential(2.0) for _ in range(20_000)])
    assert stats.kstest(e, "expon", args=(0, 0.5)).pvalue > 1e-3
    with pytest.raises(ValueError):
        s.exponential(0.0)


def test_exponential_from_uniform():
    assert R.exponential_from_uniform(0.0, 3.0) == 0.0
    assert np.isclose(R.exponential_from_uniform(1 - np.exp(-1.0), 1.0), 1.0)
