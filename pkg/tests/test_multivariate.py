import numpy as np
import pytest

from truncgauss import counters as C
from truncgauss import multivariate as M
from truncgauss import oracle as O
from truncgauss.rng import RandomStream

EQUI_POS = 0.5 * np.eye(3) + 0.5
EQUI_NEG = 1.4 * np.eye(3) - 0.4
MIXED = np.array([[1.0, 0.5, -0.3], [0.5, 1.0, 0.2], [-0.3, 0.2, 1.0]])


def test_problem_sorts_bounds():
    p = M.MultivariateProblem.make(np.eye(3), [0.1, 0.9, 0.5])
    assert list(p.a) == [0.9, 0.5, 0.1]
    x = np.array([[1.0, 2.0, 3.0]])
    assert np.array_equal(p.to_original(x), [[3.0, 1.0, 2.0]])


@pytest.mark.parametrize("sigma,a,msg", [
    (np.eye(2), [0, 0], "d >= 3"),
    (np.eye(3) * 2, [0, 0, 0], "unit diagonal"),
    (np.array([[1, .9, .9], [.9, 1, -.9], [.9, -.9, 1]]), [0, 0, 0], "positive definite"),
    (np.array([[1, .1, 0], [0, 1, 0], [0, 0, 1]]), [0, 0, 0], "symmetric"),
])
def test_problem_validation(sigma, a, msg):
    with pytest.raises(ValueError, match=msg):
        M.MultivariateProblem.make(sigma, a)


def test_plus_condition_from_precision():
    # positive correlation gives a non-positive off-diagonal precision column
    p = M.MultivariateProblem.make(EQUI_POS, [1.0, 0.5, 0.3])
    q = np.linalg.inv(p.sigma)
    expected = bool(np.all(q[:2, 2] <= 0) and q[:2, 2] @ p.a[:2] + q[2, 2] * p.a[2] <= 0)
    assert M.check_chain_splus(p, 3) is expected is True


def test_plus_condition_fails_on_linear_bound():
    p = M.MultivariateProblem.make(np.eye(3), [1.0, 0.5, 0.3])
    ok, why = M.splus_condition(np.eye(3), p.a)
    assert not ok and why == "linear bound condition"
    assert M.first_failure(p, "plus") == (3, "linear bound condition")


def test_minus_condition_for_negative_correlation():
    p = M.MultivariateProblem.make(EQUI_NEG, [0.3, 0.0, -0.2])
    assert M.check_chain_sminus(p, 3)
    assert M.first_failure(p, "minus") is None
    assert M.first_failure(p, "plus")[1] == "positive off-diagonal precision entry"


def test_not_applicable_names_both_chains():
    p = M.MultivariateProblem.make(MIXED, [1.0, 0.5, 0.3])
    res = M.try_sample(p, 10, RandomStream(0))
    assert isinstance(res, M.NotApplicable) and not res
    assert set(res.failures) == {"plus", "minus"}
    assert res.failures["plus"][0] == 3
    with pytest.raises(M.ChainError):
        M.sample_chain_splus(p, 1, RandomStream(0))
    with pytest.raises(M.ChainError):
        M.sample_chain_sminus(p, 1, RandomStream(0))


def test_check_chain_k_range():
    p = M.MultivariateProblem.make(np.eye(3), [0, 0, 0])
    with pytest.raises(ValueError):
        M.check_chain_splus(p, 2)


def _moments_match(x, ref, zmax=4.0):
    n, m = len(x), len(ref)
    for f in (lambda v: v, lambda v: v * v):
        fx, fr = f(x), f(ref)
        se = np.sqrt(fx.var(axis=0) / n + fr.var(axis=0) / m)
        z = np.abs(fx.mean(axis=0) - fr.mean(axis=0)) / se
        assert np.all(z < zmax), z


@pytest.mark.parametrize("sigma,a,chain", [
    (EQUI_POS, [1.0, 0.5, 0.3], "plus"),
    (EQUI_NEG, [0.3, 0.0, -0.2], "minus"),
    (np.eye(3), [1.0, 0.5, 0.3], "minus"),
    (0.6 * np.eye(4) + 0.4, [1.0, 0.3, 0.5, 0.0], "plus"),
])
def test_chain_matches_brute_force(sigma, a, chain):
    p = M.MultivariateProblem.make(sigma, a)
    cnt = C.Counters()
    x = M.try_sample(p, 40_000, RandomStream(21), counters=cnt)
    assert M.first_failure(p, chain) is None
    assert np.all(x >= np.asarray(a))
    ref = O.brute_force_box_sampler(sigma, a, rng=np.random.default_rng(22), n=40_000)
    _moments_match(x, ref)
    d = len(a)
    assert cnt["mv_accepts"] / cnt["mv_attempts"] >= 2.0 ** -(d - 1)


def test_direct_chain_calls_agree_with_dispatch():
    p = M.MultivariateProblem.make(EQUI_POS, [1.0, 0.5, 0.3])
    a = M.sample_chain_splus(p, 200, RandomStream(4))
    b = M.try_sample(p, 200, RandomStream(4))
    assert np.array_equal(a, b)
