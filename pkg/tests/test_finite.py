import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from truncgauss import finite as F
from truncgauss import oracle as O
from truncgauss.finite import FiniteCase
from truncgauss.rng import RandomStream

# (rho, a1, b1, a2, b2), already canonical
M3_BOX = (0.6, -1.0, 2.5, -0.5, 2.0)
T_BOX = (0.5, -0.5, 1.0, 0.0, 0.8)

bounds = st.floats(-4, 4, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.95, 0.95), bounds, st.floats(0.05, 4), bounds, st.floats(0.05, 4))
def test_every_canonical_form_maps_back_to_the_box(rho, a1, w1, a2, w2):
    b1, b2 = a1 + w1, a2 + w2
    for f in F.canonical_forms(rho, a1, b1, a2, b2):
        assert f.is_canonical
        corners = [(y1, y2) for y1 in (f.a1, f.b1) for y2 in (f.a2, f.b2)]
        xs = np.array([f.transform.to_original(*c) for c in corners])
        assert np.allclose(xs[:, 0].min(), a1) and np.allclose(xs[:, 0].max(), b1)
        assert np.allclose(xs[:, 1].min(), a2) and np.allclose(xs[:, 1].max(), b2)
        # correlation sign follows the transform
        assert f.rho == pytest.approx(abs(rho))


def test_canonicalize_keeps_canonical_input():
    p = F.canonicalize(*M3_BOX)
    assert p.is_canonical


def test_kappa_matches_scipy():
    p = F.FiniteProblem(*M3_BOX)
    g = p.geometry()
    nu = p.nu
    for x in (-0.5, 0.0, 1.3, 2.5):
        want = special.ndtr((p.b2 - p.rho * x) / nu) - special.ndtr((p.a2 - p.rho * x) / nu)
        assert F.kappa(x, g) == pytest.approx(want, rel=1e-13)


def test_xi_prime_is_derivative_of_xi():
    g = F.FiniteProblem(*T_BOX).geometry()
    h = 1e-6
    for x in (-0.4, 0.1, 0.9):
        num = (F.xi(x + h, g) - F.xi(x - h, g)) / (2 * h)
        assert F.xi_prime(x, g) == pytest.approx(num, rel=1e-6, abs=1e-8)


def test_case_split_at_delta():
    g = F.FiniteProblem(*M3_BOX).geometry()
    assert F.classify_finite(g) is FiniteCase.M3
    assert F.classify_finite(F.FiniteProblem(*T_BOX).geometry()) is FiniteCase.T
    # width exactly delta goes to M3
    nu = math.sqrt(1 - 0.25)
    p = F.FiniteProblem(0.5, -1.0, 1.0, 0.0, 2.0 * nu)
    g = p.geometry()
    assert g.beta1 - g.beta0 == pytest.approx(2.0, abs=1e-15)
    assert F.classify_finite(F.FiniteGeometry(g.alpha, g.beta0, g.beta0 + 2.0, g.gamma0,
                                              g.gamma1, 1.0)) is FiniteCase.M3


@pytest.mark.parametrize("rule", [F.LEFT_LITERAL, F.LEFT_REACH, F.LEFT_MIN_MASS])
def test_m3_weights_match_envelope_integral(rule):
    p = F.FiniteProblem(*M3_BOX)
    prm = p.params(left_rule=rule)
    desc = F.envelope_description(prm, rule)
    box = O.BoxSpec(p.rho, p.a1, p.a2, p.b1, p.b2)
    env = lambda x: math.exp(O.finite_log_envelope(box, desc, x))
    cuts = [p.a1, p.a2 / p.rho, p.b2 / p.rho, p.b1]
    cuts = sorted(min(max(c, p.a1), p.b1) for c in cuts)
    pieces = [integrate.quad(env, lo, hi, epsabs=0, epsrel=1e-11)[0]
              for lo, hi in zip(cuts[:-1], cuts[1:])]
    zl, zc, zr = F.m3_weights(p, left_rule=rule)
    assert zl == pytest.approx(pieces[0], rel=1e-7, abs=1e-300)
    assert zc == pytest.approx(pieces[1], rel=1e-7)
    assert zr == pytest.approx(pieces[2], rel=1e-7, abs=1e-300)


def test_min_mass_rule_never_loses():
    for box in (M3_BOX, (0.9, -3.0, 3.0, -2.0, 2.0), (0.3, -3.0, 3.0, 0.5, 4.0)):
        p = F.FiniteProblem(*box)
        logz = {r: p.params(left_rule=r)[F.F_LOGZ]
                for r in (F.LEFT_LITERAL, F.LEFT_REACH, F.LEFT_MIN_MASS)}
        assert logz[F.LEFT_MIN_MASS] <= min(logz.values()) + 1e-12


def test_tangent_envelope_touches_and_dominates():
    p = F.FiniteProblem(*T_BOX)
    g = p.geometry()
    env = F.build_tangent_envelope(p)
    assert env(env.v) == pytest.approx(F.xi(env.v, g), abs=1e-12)
    assert env(env.w) == pytest.approx(F.xi(env.w, g), abs=1e-12)
    for x in np.linspace(p.a1, p.b1, 501):
        assert env(x) >= F.xi(x, g) - 1e-12


@pytest.mark.parametrize("box", [M3_BOX, T_BOX, (0.95, 0.0, 3.0, 0.5, 0.9),
                                 (0.2, -4.0, 4.0, -0.1, 0.1)])
def test_acceptance_matches_quadrature(box):
    p = F.FiniteProblem(*box)
    prm = p.params()
    desc = F.envelope_description(prm)
    acc, _ = F.empirical_acceptance(p, 200_000, RandomStream(2))
    want = O.finite_acceptance(O.BoxSpec(p.rho, p.a1, p.a2, p.b1, p.b2), desc).value
    assert abs(acc - want) < 4 * math.sqrt(want * (1 - want) / 200_000)


@pytest.mark.parametrize("box", [(0.6, -0.5, 2.5, -1.0, 2.0), (-0.7, -1.0, 1.5, -0.5, 2.0),
                                 (0.4, 0.5, 1.0, -2.0, 0.0), (-0.3, -2.0, -0.2, 0.1, 3.0),
                                 (0.0, -1.0, 0.5, 0.2, 1.0)])
def test_draws_match_brute_force_grid(box):
    rho, a1, b1, a2, b2 = box
    p = F.canonicalize(*box)
    sigma = [[1.0, rho], [rho, 1.0]]
    pilot = O.brute_force_box_sampler(sigma, [a1, a2], [b1, b2],
                                      rng=np.random.default_rng(9), n=20_000)
    e1, e2 = O.grid_edges(pilot[:, 0], 8), O.grid_edges(pilot[:, 1], 8)
    x = F.sample_many(p, 50_000, RandomStream(10))
    assert np.all((x[:, 0] >= a1) & (x[:, 0] <= b1) & (x[:, 1] >= a2) & (x[:, 1] <= b2))
    counts = np.histogram2d(x[:, 0], x[:, 1], bins=[e1, e2])[0]
    probs = O.box_cell_probabilities(O.BoxSpec(rho, a1, a2, b1, b2), e1, e2)
    assert O.chi2_grid_test(counts, probs) > 1e-3


def test_tiny_box():
    p = F.canonicalize(0.5, 0.0, 1e-6, 0.0, 1e-6)
    x = F.sample_many(p, 1000, RandomStream(1))
    assert np.all((x >= 0.0) & (x <= 1e-6))


def test_far_box():
    p = F.canonicalize(0.8, 6.0, 6.5, 5.0, 6.0)
    x = F.sample_many(p, 2000, RandomStream(1))
    assert np.all(np.isfinite(x))
    assert np.all((x[:, 0] >= 6.0) & (x[:, 0] <= 6.5) & (x[:, 1] >= 5.0) & (x[:, 1] <= 6.0))


def test_invalid_boxes():
    with pytest.raises(ValueError):
        F.FiniteProblem(0.5, 1.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        F.FiniteProblem(0.5, 0.0, math.inf, 0.0, 1.0)
    with pytest.raises(ValueError):
        F.FiniteProblem(0.5, 0.0, 1.0, -2.0, -1.0).params()


def test_case_entry_points():
    m3 = F.FiniteProblem(*M3_BOX)
    t = F.FiniteProblem(*T_BOX)
    assert len(F.sample_m3(m3, RandomStream(0))) == 2
    assert len(F.sample_t(t, RandomStream(0))) == 2
    with pytest.raises(ValueError):
        F.sample_t(m3, RandomStream(0))
    with pytest.raises(ValueError):
        F.m3_weights(t)
