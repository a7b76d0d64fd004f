import math

import numpy as np
import pytest
from scipy import integrate

from truncgauss import counters as C
from truncgauss import oracle as O
from truncgauss import semifinite as SF
from truncgauss.rng import RandomStream
from truncgauss.semifinite import CaseLabel

PROBLEMS = {
    CaseLabel.SPlus: (0.5, 1.0, 0.2),
    CaseLabel.MPlus: (0.5, 1.0, 0.8),
    CaseLabel.SMinus: (-0.5, 1.0, 0.2),
    CaseLabel.MMinus: (-0.5, 1.0, -1.0),
}


@pytest.mark.parametrize("case,args", PROBLEMS.items())
def test_classification_examples(case, args):
    assert SF.SemiFiniteProblem.make(*args).case is case


def test_negative_rho_with_small_a1_is_splus():
    assert SF.SemiFiniteProblem.make(-0.7, -1.0, -2.0).case is CaseLabel.SPlus


def test_boundary_tie_goes_to_splus():
    assert SF.SemiFiniteProblem.make(0.5, 1.0, 0.5).case is CaseLabel.SPlus


def test_make_swaps_into_canonical_order():
    p = SF.SemiFiniteProblem.make(0.3, -1.0, 2.0)
    assert (p.a1, p.a2, p.swapped) == (2.0, -1.0, True)
    x = SF.sample_many(p, 2000, RandomStream(1))
    assert np.all(x[:, 0] >= -1.0) and np.all(x[:, 1] >= 2.0)


def test_problem_validation():
    with pytest.raises(ValueError):
        SF.SemiFiniteProblem(0.2, 0.0, 1.0)
    with pytest.raises(ValueError):
        SF.SemiFiniteProblem.make(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        SF.SemiFiniteProblem.make(0.1, math.inf, 0.0)


def _env_mass(p, case, lo, hi):
    box = O.BoxSpec(p.rho, p.a1, p.a2)
    f = lambda x: math.exp(O.semifinite_log_envelope(box, case, x))
    return integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]


def test_mminus_weights_match_envelope_pieces():
    p = SF.SemiFiniteProblem.make(*PROBLEMS[CaseLabel.MMinus])
    w = SF.mixture_weights(p)
    split = p.a2 / p.rho
    assert w.w1 == pytest.approx(_env_mass(p, "MMinus", p.a1, split), rel=1e-8)
    assert w.w2 == pytest.approx(_env_mass(p, "MMinus", split, math.inf), rel=1e-8)


@pytest.mark.parametrize("args", [(0.5, 1.0, 0.8), (0.9, 0.5, 0.47), (0.2, 3.0, 2.0)])
def test_mplus_weights_match_envelope_pieces(args):
    p = SF.SemiFiniteProblem.make(*args)
    assert p.case is CaseLabel.MPlus
    w = SF.mixture_weights(p)
    split = p.a2 / p.rho
    assert w.w1 == pytest.approx(_env_mass(p, "MPlus", split, math.inf), rel=1e-8)
    assert w.w2 == pytest.approx(_env_mass(p, "MPlus", p.a1, split), rel=1e-8)
    assert 0.0 < w.p1 < 1.0


@pytest.mark.parametrize("case,args", PROBLEMS.items())
def test_acceptance_matches_quadrature(case, args):
    p = SF.SemiFiniteProblem.make(*args)
    acc, _ = SF.empirical_acceptance(p, 200_000, RandomStream(3))
    want = O.semifinite_acceptance(O.BoxSpec(p.rho, p.a1, p.a2), case.name).value
    sig = math.sqrt(want * (1 - want) / 200_000)
    assert abs(acc - want) < 4 * sig


@pytest.mark.parametrize("args", [*PROBLEMS.values(), (0.0, 0.5, -0.3)])
def test_draws_match_brute_force_grid(args):
    p = SF.SemiFiniteProblem.make(*args)
    rho = args[0]
    sigma = [[1.0, rho], [rho, 1.0]]
    lower = [args[1], args[2]]
    pilot = O.brute_force_box_sampler(sigma, lower, rng=np.random.default_rng(5), n=20_000)
    e1, e2 = O.grid_edges(pilot[:, 0], 8), O.grid_edges(pilot[:, 1], 8)
    x = SF.sample_many(p, 50_000, RandomStream(6))
    counts = np.histogram2d(x[:, 0], x[:, 1], bins=[e1, e2])[0]
    box = O.BoxSpec(rho, *lower)
    probs = O.box_cell_probabilities(box, e1, e2)
    assert O.chi2_grid_test(counts, probs) > 1e-3


def test_independent_case_is_product_of_marginals():
    p = SF.SemiFiniteProblem.make(0.0, 0.5, -0.3)
    x = SF.sample_many(p, 40_000, RandomStream(8))
    for col, a in ((0, 0.5), (1, -0.3)):
        assert O.ks_passes(x[:, col], lambda t, a=a: O.exact_cdf_tn(a, math.inf, t))
    assert abs(np.corrcoef(x.T)[0, 1]) < 0.02


def test_case_specific_entry_points():
    p = SF.SemiFiniteProblem.make(*PROBLEMS[CaseLabel.SMinus])
    x1, x2 = SF.sample_sminus(p, RandomStream(0))
    assert x1 >= p.a1 and x2 >= p.a2
    with pytest.raises(ValueError):
        SF.sample_splus(p, RandomStream(0))


def test_counters_and_determinism():
    p = SF.SemiFiniteProblem.make(0.5, 1.0, 0.8)
    cnt = C.Counters()
    a = SF.sample_many(p, 500, RandomStream(4), counters=cnt)
    b = SF.sample_many(p, 500, RandomStream(4))
    assert np.array_equal(a, b)
    assert cnt["biv_accepts"] == 500
    assert cnt["biv_proposals"] >= 500
