"""Reference computations built on scipy only.

Nothing here imports the samplers' kernels: CDFs, densities, envelopes and
their integrals are re-derived with ``scipy.special`` and
``scipy.integrate.quad`` so that agreement with the samplers is evidence,
not tautology.  Inputs describing *which* envelope a sampler chose (case
label, tilt flag, tangent points) are passed in as plain numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

LAMBDA = 0.68
SQRT_PI_2 = math.sqrt(math.pi / 2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class OracleError(ArithmeticError):
    """Quadrature failed to converge or a probability mass underflowed."""


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int

    @property
    def relative_error(self) -> float:
        return self.error_estimate / abs(self.value) if self.value else math.inf


# --------------------------------------------------------------------------
# one-dimensional pieces


def norm_logpdf(x):
    return -0.5 * np.square(x) - LOG_SQRT_2PI


def log_ndtr_diff(lo, hi):
    """log(Phi(hi) - Phi(lo)), elementwise, accurate in both tails."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    flip = lo > 0
    l2 = np.where(flip, -hi, lo)
    h2 = np.where(flip, -lo, hi)
    big = special.log_ndtr(h2)
    small = special.log_ndtr(l2)
    with np.errstate(divide="ignore"):
        out = big + np.log(-np.expm1(small - big))
    return out


def mills(x):
    """Phi(-x) / phi(x) via the scaled complementary error function."""
    return special.erfcx(np.asarray(x) / math.sqrt(2.0)) * SQRT_PI_2


def exact_cdf_tn(a: float, b: float, x):
    """CDF of N(0,1) restricted to [a, b] at x (vectorised in x)."""
    x = np.clip(np.asarray(x, dtype=float), a, b)
    if a > 0.0:
        # right tail: work with survival ratios
        la = special.log_ndtr(-a)
        lx = special.log_ndtr(-x) - la
        lb = special.log_ndtr(-b) - la if b < math.inf else -math.inf
        den = -math.expm1(lb)
        num = -np.expm1(lx)
    elif b < 0.0:
        lb = special.log_ndtr(b)
        la = special.log_ndtr(a) - lb if a > -math.inf else -math.inf
        lx = special.log_ndtr(x) - lb
        den = -math.expm1(la)
        num = np.exp(lx) - math.exp(la)
    else:
        den = special.ndtr(b) - special.ndtr(a)
        num = special.ndtr(x) - special.ndtr(a)
    if not den > 0.0 or not math.isfinite(den):
        raise OracleError(f"truncated mass underflows on [{a}, {b}]")
    return np.clip(num / den, 0.0, 1.0)


def tn_quantile(a: float, b: float, p):
    """Inverse of :func:`exact_cdf_tn` (bisection-free, via log ndtr)."""
    p = np.asarray(p, dtype=float)
    if a > 0.0:
        la = special.log_ndtr(-a)
        lb = special.log_ndtr(-b) if b < math.inf else -math.inf
        # survival target S(x) = S(a) - p (S(a) - S(b))
        lt = la + np.log1p(-p * -math.expm1(lb - la))
        return -special.ndtri_exp(lt)
    lo, hi = special.ndtr(a), special.ndtr(b)
    return special.ndtri(lo + p * (hi - lo))


def _quad(f, lo, hi, points=()):
    pts = sorted({float(t) for t in points if lo < t < hi})
    edges = [lo, *pts, hi]
    total = 0.0
    err = 0.0
    nev = 0
    for u, v in zip(edges[:-1], edges[1:]):
        val, e, info = integrate.quad(f, u, v, epsabs=0.0, epsrel=1e-12, limit=400,
                                      full_output=True)[:3]
        total += val
        err += e
        nev += info["neval"]
    return QuadratureResult(total, err, nev)


def _log_integral(logf, lo, hi, points=(), span=40.0):
    """Integral of exp(logf) on [lo, hi] as (log scale, QuadratureResult of the
    rescaled integrand).  Infinite ends are cut where the integrand is
    negligible next to its peak."""
    if hi == math.inf:
        hi = max(lo, 0.0) + span
    if lo == -math.inf:
        lo = min(hi, 0.0) - span
    grid = np.linspace(lo, hi, 4001)
    vals = np.array([logf(t) for t in grid])
    shift = float(np.max(vals))
    if not math.isfinite(shift):
        raise OracleError("integrand vanishes on the whole range")
    k = int(np.argmax(vals))
    res = _quad(lambda t: math.exp(logf(t) - shift), lo, hi, (*points, grid[k]))
    return shift, res


# --------------------------------------------------------------------------
# bivariate targets and envelopes


@dataclass(frozen=True)
class BoxSpec:
    """Raw bivariate problem: N2(0, [[1, rho], [rho, 1]]) on a (possibly
    semi-infinite) box."""

    rho: float
    a1: float
    a2: float
    b1: float = math.inf
    b2: float = math.inf

    @property
    def nu(self) -> float:
        return math.sqrt((1.0 - self.rho) * (1.0 + self.rho))


def marginal_log_unnorm(p: BoxSpec, x1: float) -> float:
    """log of phi(x1) P(a2 <= X2 <= b2 | X1 = x1)."""
    nu = p.nu
    lo = (p.a2 - p.rho * x1) / nu
    hi = (p.b2 - p.rho * x1) / nu
    return float(norm_logpdf(x1) + log_ndtr_diff(lo, hi))


def marginal_unnorm(p: BoxSpec, x1: float) -> float:
    return math.exp(marginal_log_unnorm(p, x1))


def marginal_by_inner_quadrature(p: BoxSpec, x1: float) -> float:
    """Same quantity by integrating the joint density over x2."""
    cov = np.array([[1.0, p.rho], [p.rho, 1.0]])
    dist = stats.multivariate_normal(mean=[0.0, 0.0], cov=cov)
    cond_mean = p.rho * x1
    nu = p.nu
    lo = max(p.a2, cond_mean - 40 * nu)
    hi = min(p.b2, cond_mean + 40 * nu)
    if lo >= hi:
        return 0.0
    val = integrate.quad(lambda x2: dist.pdf([x1, x2]), lo, hi, epsabs=0, epsrel=1e-12,
                         points=[min(max(cond_mean, lo), hi)], limit=200)[0]
    return val


def box_probability(p: BoxSpec) -> float:
    """P(X in box) by one-dimensional quadrature of the marginal."""
    shift, res = _log_integral(lambda t: marginal_log_unnorm(p, t), p.a1, p.b1)
    return math.exp(shift) * res.value


def _log_chi(x):
    return LAMBDA * x + np.log(mills(x))


def _log_d(x0):
    return max(math.log(SQRT_PI_2), float(_log_chi(-x0)))


def semifinite_log_envelope(p: BoxSpec, case: str, x1: float) -> float:
    """log envelope for case in {'SPlus','SMinus','MPlus','MMinus'}."""
    rho, a1, a2, nu = p.rho, p.a1, p.a2, p.nu
    base = float(norm_logpdf(x1))
    z = (rho * x1 - a2) / nu
    prod = base + float(norm_logpdf(z))
    if case == "SPlus":
        return base
    if case == "SMinus":
        z0 = (rho * a1 - a2) / nu
        c = SQRT_PI_2 if z0 == 0 else min(SQRT_PI_2, -1.0 / z0)
        return prod + math.log(c)
    if case == "MMinus":
        return base if z > 0 else prod + math.log(SQRT_PI_2)
    if case == "MPlus":
        if z >= 0:
            return base
        return prod + LAMBDA * z + _log_d((rho * a1 - a2) / nu)
    raise ValueError(case)


def _log_mills_neg(z: float) -> float:
    return float(special.log_ndtr(z)) + 0.5 * z * z + LOG_SQRT_2PI


def _side_bound(kind: str, z_lo: float, z_hi: float, tight: bool) -> tuple[float, float]:
    """(lambda, log K) for Phi(z) <= K phi(z) exp(lambda z) on [z_lo, z_hi <= 0]."""
    if kind == "flat":
        return 0.0, math.log(_c(z_hi) if tight else SQRT_PI_2)
    if kind == "tilt":
        return LAMBDA, _log_d(z_lo)
    if kind == "secant":
        g_lo, g_hi = _log_mills_neg(z_lo), _log_mills_neg(z_hi)
        if z_hi - z_lo < 1e-12:
            return 0.0, max(g_lo, g_hi) + 1e-12
        lam = (g_hi - g_lo) / (z_hi - z_lo)
        return lam, g_lo - lam * z_lo + 1e-12
    raise ValueError(kind)


def finite_log_envelope(p: BoxSpec, desc: dict, x1: float) -> float:
    """log envelope of a canonical finite problem.

    ``desc`` holds ``case`` ('M3' or 'T').  For M3: ``left`` and ``right``
    name the bound used on each side piece ('flat', 'tilt' or 'secant'),
    and ``tight`` says whether flat constants are taken at the piece's
    largest Phi argument rather than at 0.  For T: the tangent points
    ``v`` and ``w``.
    """
    rho, a1, b1, a2, b2, nu = p.rho, p.a1, p.b1, p.a2, p.b2, p.nu
    alpha, beta1, beta0 = rho / nu, -a2 / nu, -b2 / nu
    if desc["case"] == "T":
        lines = []
        for t in {desc["v"], desc["w"]}:
            lines.append(_xi(p, t) + _xi_prime(p, t) * (x1 - t))
        return min(lines)
    g1, g0 = a2 / rho, b2 / rho
    ups = 0.5 * (beta1 - beta0)
    base = float(norm_logpdf(x1))
    tight = desc.get("tight", False)
    if x1 < g1:
        z = alpha * x1 + beta1
        z_lo = alpha * a1 + beta1
        z_hi = min(alpha * min(g1, b1) + beta1, 0.0)
        lam, log_k = _side_bound(desc["left"], min(z_lo, 0.0), z_hi, tight)
        return base + float(norm_logpdf(z)) + lam * z + log_k
    if x1 <= g0:
        return base + float(log_ndtr_diff(-ups, ups))
    w = -(alpha * x1 + beta0)
    w_hi = min(-alpha * max(g0, a1) - beta0, 0.0)
    w_lo = min(-alpha * b1 - beta0, w_hi)
    lam, log_k = _side_bound(desc.get("right", "flat"), w_lo, w_hi, tight)
    return base + float(norm_logpdf(w)) + lam * w + log_k


def _c(x0: float) -> float:
    return SQRT_PI_2 if x0 == 0 else min(SQRT_PI_2, -1.0 / x0)


def _xi(p: BoxSpec, x: float) -> float:
    return marginal_log_unnorm(p, x)


def _xi_prime(p: BoxSpec, x: float, h: float = 1e-5) -> float:
    # central difference; the oracle deliberately avoids the closed form
    return (_xi(p, x + h) - _xi(p, x - h)) / (2 * h)


def acceptance_rate_quadrature(p: BoxSpec, log_envelope) -> QuadratureResult:
    """Z_target / Z_envelope for a target marginal and an envelope callable."""
    points = []
    if p.rho != 0.0:
        points += [p.a2 / p.rho]
        if p.b2 < math.inf:
            points += [p.b2 / p.rho]
    lo, hi = p.a1, p.b1
    s_t, t = _log_integral(lambda x: marginal_log_unnorm(p, x), lo, hi, points)
    s_e, e = _log_integral(log_envelope, lo, hi, points)
    ratio = math.exp(s_t - s_e) * t.value / e.value
    err = ratio * (t.relative_error + e.relative_error)
    return QuadratureResult(ratio, err, t.evaluations + e.evaluations)


def semifinite_acceptance(p: BoxSpec, case: str) -> QuadratureResult:
    return acceptance_rate_quadrature(p, lambda x: semifinite_log_envelope(p, case, x))


def finite_acceptance(p: BoxSpec, desc: dict) -> QuadratureResult:
    return acceptance_rate_quadrature(p, lambda x: finite_log_envelope(p, desc, x))


# --------------------------------------------------------------------------
# acceptance-rate bounds


def sminus_rate_floor() -> QuadratureResult:
    """sqrt(2/pi) E[psi(Z + sqrt(2/pi))], Z ~ TN[0, inf)(0, 1)."""
    r = math.sqrt(2.0 / math.pi)
    f = lambda z: 2.0 * math.exp(float(norm_logpdf(z))) * float(mills(z + r))
    val, err = integrate.quad(f, 0.0, math.inf, epsabs=0.0, epsrel=1e-12)
    return QuadratureResult(r * val, r * err, 0)


def sminus_floor_at(alpha: float) -> float:
    """E[psi(Z + alpha)] / c(-alpha), Z ~ TN[0, inf)(0, 1)."""
    f = lambda z: 2.0 * math.exp(float(norm_logpdf(z))) * float(mills(z + alpha))
    val = integrate.quad(f, 0.0, math.inf, epsabs=0.0, epsrel=1e-12)[0]
    c = SQRT_PI_2 if alpha == 0 else min(SQRT_PI_2, 1.0 / alpha)
    return val / c


def sminus_rate(rho: float, a1: float, a2: float) -> float:
    """Acceptance rate of the S- proposal written as an expectation over
    TN[a1, inf)(rho a2, nu^2), evaluated by quadrature."""
    nu = math.sqrt((1 - rho) * (1 + rho))
    z0 = (rho * a1 - a2) / nu
    c = SQRT_PI_2 if z0 == 0 else min(SQRT_PI_2, -1.0 / z0)
    lo = (a1 - rho * a2) / nu
    log_mass = float(special.log_ndtr(-lo))

    def f(t):
        x1 = rho * a2 + nu * t
        z = (rho * x1 - a2) / nu
        return math.exp(float(norm_logpdf(t)) - log_mass) * float(mills(-z))

    hi = max(lo, 0.0) + 40.0
    val = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-11, limit=400)[0]
    return val / c


# --------------------------------------------------------------------------
# brute force and tests


def brute_force_box_sampler(sigma, a, b=None, rng: np.random.Generator | None = None,
                            n: int = 1, min_mass: float = 1e-4, batch: int = 65536):
    """Exact draws of N(0, sigma) restricted to the box [a, b] by plain
    rejection of unconstrained vectors."""
    sigma = np.asarray(sigma, dtype=float)
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    b = np.full(d, np.inf) if b is None else np.asarray(b, dtype=float)
    rng = np.random.default_rng(0) if rng is None else rng
    chol = np.linalg.cholesky(sigma)
    pilot = rng.standard_normal((batch, d)) @ chol.T
    mass = np.mean(np.all((pilot >= a) & (pilot <= b), axis=1))
    if mass < min_mass:
        raise OracleError(f"box mass {mass:.2e} below {min_mass:.0e}")
    out = []
    got = 0
    while got < n:
        z = rng.standard_normal((batch, d)) @ chol.T
        keep = z[np.all((z >= a) & (z <= b), axis=1)]
        out.append(keep)
        got += keep.shape[0]
    return np.concatenate(out)[:n]


def ks_statistic(samples, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance between samples and a CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.shape[0]
    if n < 100:
        raise ValueError("ks_statistic needs at least 100 samples")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


KS_CRIT_01 = 1.63


def ks_passes(samples, cdf) -> bool:
    n = len(samples)
    return ks_statistic(samples, cdf) < KS_CRIT_01 / math.sqrt(n)


def chi2_grid_test(counts, probs, min_expected: float = 5.0) -> float:
    """Pearson chi-square p-value; cells with small expectation are pooled."""
    counts = np.asarray(counts, dtype=float).ravel()
    probs = np.asarray(probs, dtype=float).ravel()
    probs = probs / probs.sum()
    n = counts.sum()
    order = np.argsort(probs)
    obs, exp = [], []
    acc_o = acc_e = 0.0
    for k in order:
        acc_o += counts[k]
        acc_e += n * probs[k]
        if acc_e >= min_expected:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 and exp:
        obs[-1] += acc_o
        exp[-1] += acc_e
    obs = np.array(obs)
    exp = np.array(exp)
    if len(exp) < 2:
        raise ValueError("chi2_grid_test: fewer than two usable cells")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    return float(stats.chi2.sf(stat, len(exp) - 1))


def box_cell_probabilities(p: BoxSpec, edges1, edges2) -> np.ndarray:
    """P(X1 in cell_i, X2 in cell_j | box), cells from the given edges."""
    nu = p.nu
    k1 = len(edges1) - 1
    k2 = len(edges2) - 1
    out = np.empty((k1, k2))
    total = box_probability(p)
    e1 = np.clip(np.asarray(edges1, dtype=float), p.a1, p.b1)
    e2 = np.clip(np.asarray(edges2, dtype=float), p.a2, p.b2)
    for i in range(k1):
        lo, hi = e1[i], e1[i + 1]
        for j in range(k2):
            c, d = e2[j], e2[j + 1]
            if not (lo < hi and c < d):
                out[i, j] = 0.0
                continue

            def f(x1, c=c, d=d):
                return math.exp(float(norm_logpdf(x1)
                                      + log_ndtr_diff((c - p.rho * x1) / nu,
                                                      (d - p.rho * x1) / nu)))

            out[i, j] = integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-10, limit=200)[0]
    return out / total


def grid_edges(samples_1d, cells: int = 20) -> np.ndarray:
    """Equal-count cell edges from a pilot sample, outer edges open.

    The pilot must be independent of the sample under test.
    """
    q = np.quantile(samples_1d, np.linspace(0.0, 1.0, cells + 1))
    q[0] = -np.inf
    q[-1] = np.inf
    return q
