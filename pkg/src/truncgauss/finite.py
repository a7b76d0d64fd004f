"""Bivariate standard normal with correlation rho restricted to a box.

After canonicalisation (rho >= 0, b2 >= 0, and a2 >= a1 or b1 <= 0) the
marginal of X1 is phi(x1) * kappa(x1) on [a1, b1] with

    kappa(x) = Phi(alpha x + beta1) - Phi(alpha x + beta0),
    alpha = rho/nu, beta1 = -a2/nu, beta0 = -b2/nu.

When beta1 - beta0 >= delta (default 2) the M3 mixture is used: kappa is
split at gamma1 = a2/rho and gamma0 = b2/rho into a left tail bounded like
the semi-finite tilted component, a flat centre bounded by 2 Phi(upsilon) - 1,
and a right tail bounded like the semi-finite product component.  Otherwise
(case T) x1 is drawn from one or two tangent lines of the concave log
marginal xi = log phi + log kappa.  X2 then comes from
TN[a2, b2](rho x1, nu^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numba import njit

from . import counters as C
from .rng import RandomStream
from .semifinite import RHO_LIMIT
from .special import (
    LOG_SQRT_2PI,
    SQRT_PI_2,
    TILT,
    X_D,
    c_fun,
    log_d_fun,
    log_Phi,
    log_Phi_diff,
)
from .tables import RegionTable, default_table
from .univariate import tn_k, trunc_exp_u

DELTA = 2.0
K_MIN = 5

CASE_M3 = 0
CASE_T = 1
CASE_INDEP = 2

#: left-piece bound selection: the literal "max(b1, gamma1) > 0" rule; tilt
#: whenever the left piece's Phi argument reaches above -x_d; or, for each
#: side piece, the candidate bound with the smallest envelope mass.
#: LEFT_MIN_MASS also evaluates flat constants at the piece's largest Phi
#: argument instead of 0 and adds the secant bound as a candidate.
LEFT_LITERAL = 0
LEFT_REACH = 1
LEFT_MIN_MASS = 2
DEFAULT_LEFT_RULE = LEFT_MIN_MASS


class FiniteCase(IntEnum):
    M3 = CASE_M3
    T = CASE_T


# parameter block layout
F_RHO = 0
F_A1 = 1
F_B1 = 2
F_A2 = 3
F_B2 = 4
F_NU = 5
F_ALPHA = 6
F_BETA0 = 7
F_BETA1 = 8
F_GAMMA0 = 9
F_GAMMA1 = 10
F_UPS = 11
F_CASE = 12
# M3: cumulative component probabilities and per-component constants
F_PL = 13
F_PC = 14
F_L_LAMBDA = 15
F_L_LOGK = 16
F_L_MEAN = 17
F_L_HI = 18
F_C_LO = 19
F_C_HI = 20
F_C_LOGK = 21
F_R_LO = 22
F_R_MEAN = 23
# T: tangent points and pieces
F_V = 24
F_W = 25
F_CROSS = 26
F_SV = 27
F_SW = 28
F_XIV = 29
F_XIW = 30
F_P1 = 31
# log component weights, kept for reporting
F_LZL = 32
F_LZC = 33
F_LZR = 34
F_R_LOGK = 35
F_LOGZ = 36    # log envelope mass, comparable across orientations
F_R_LAMBDA = 37
F_L_KIND = 38
F_R_KIND = 39
F_LEN = 40

# side-piece bound kinds
BOUND_FLAT = 0      # Phi(z) <= c phi(z)
BOUND_TILT = 1      # Phi(z) <= d(z0) phi(z) exp(0.68 z)
BOUND_SECANT = 2    # chord of the convex log(Phi/phi) over the piece


@njit(cache=True)
def log_kappa_k(x, alpha, beta0, beta1):
    return log_Phi_diff(alpha * x + beta0, alpha * x + beta1)


@njit(cache=True)
def kappa_k(x, alpha, beta0, beta1):
    return math.exp(log_kappa_k(x, alpha, beta0, beta1))


@njit(cache=True)
def xi_k(x, alpha, beta0, beta1):
    return -0.5 * x * x - LOG_SQRT_2PI + log_kappa_k(x, alpha, beta0, beta1)


@njit(cache=True)
def xi_prime_k(x, alpha, beta0, beta1):
    lk = log_kappa_k(x, alpha, beta0, beta1)
    z1 = alpha * x + beta1
    z0 = alpha * x + beta0
    r1 = math.exp(-0.5 * z1 * z1 - LOG_SQRT_2PI - lk)
    r0 = math.exp(-0.5 * z0 * z0 - LOG_SQRT_2PI - lk)
    return -x + alpha * (r1 - r0)


@njit(cache=True)
def _log_exp_integral(rate, width):
    """log of the integral of exp(rate t) over [0, width]."""
    rw = rate * width
    if abs(rw) < 1e-12:
        return math.log(width) + 0.5 * rw
    if rate > 0.0:
        return rw + math.log(-math.expm1(-rw)) - math.log(rate)
    return math.log(-math.expm1(rw)) - math.log(-rate)


@njit(cache=True)
def _mix3(lzl, lzc, lzr):
    top = max(lzl, max(lzc, lzr))
    el = math.exp(lzl - top)
    ec = math.exp(lzc - top)
    er = math.exp(lzr - top)
    s = el + ec + er
    return el / s, (el + ec) / s


@njit(cache=True)
def _log_add(x, y):
    if x == -math.inf:
        return y
    if y == -math.inf:
        return x
    top = max(x, y)
    return top + math.log(math.exp(x - top) + math.exp(y - top))


@njit(cache=True)
def _log_mills_neg(z):
    """log(Phi(z) / phi(z)); convex in z."""
    return log_Phi(z) + 0.5 * z * z + LOG_SQRT_2PI


@njit(cache=True)
def _secant(z_lo, z_hi):
    """(lambda, log K) with Phi(z) <= K phi(z) exp(lambda z) on [z_lo, z_hi]."""
    g_lo = _log_mills_neg(z_lo)
    if z_hi - z_lo < 1e-12:
        return 0.0, max(g_lo, _log_mills_neg(z_hi)) + 1e-12
    lam = (_log_mills_neg(z_hi) - g_lo) / (z_hi - z_lo)
    # 1e-12 absorbs rounding where the chord touches the curve
    return lam, g_lo - lam * z_lo + 1e-12


@njit(cache=True)
def _side_mass(rho, nu, a, mu, log_k, lo, hi):
    """log of int_lo^hi phi(x) phi(z) exp(mu z) K dx with z = (rho x - a)/nu.

    Returns (log mass, mean of the Gaussian proposal)."""
    m = rho * (a + mu * nu)
    expo = -0.5 * a * a + 0.5 * (mu * rho) ** 2 - mu * nu * a
    lz = (math.log(nu) - LOG_SQRT_2PI + log_k + expo
          + log_Phi_diff((lo - m) / nu, (hi - m) / nu))
    return lz, m


@njit(cache=True)
def tangent_points_k(a1, b1, alpha, beta0, beta1):
    """(v, w) tangent points; w == v means a single tangent."""
    m = -alpha * (beta0 + beta1) / (2.0 * (1.0 + alpha * alpha))
    s = 1.0 / math.sqrt(1.0 + alpha * alpha)
    if a1 >= m:
        v = min(max(m + s, a1), b1)
        return v, v
    if b1 <= m:
        v = max(min(m - s, b1), a1)
        return v, v
    v = max(a1, m - s)
    w = min(b1, m + s)
    if w - v < s:
        mid = 0.5 * (v + w)
        return mid, mid
    return v, w


@njit(cache=True)
def setup_k(rho, a1, b1, a2, b2, delta, left_rule):
    """Parameter block for a canonical problem."""
    prm = np.zeros(F_LEN)
    nu = math.sqrt((1.0 - rho) * (1.0 + rho))
    prm[F_RHO] = rho
    prm[F_A1] = a1
    prm[F_B1] = b1
    prm[F_A2] = a2
    prm[F_B2] = b2
    prm[F_NU] = nu
    alpha = rho / nu
    beta1 = -a2 / nu
    beta0 = -b2 / nu
    prm[F_ALPHA] = alpha
    prm[F_BETA0] = beta0
    prm[F_BETA1] = beta1
    prm[F_UPS] = 0.5 * (beta1 - beta0)
    if rho == 0.0:
        prm[F_CASE] = CASE_INDEP
        prm[F_LOGZ] = log_Phi_diff(a1, b1)
        return prm
    g1 = a2 / rho
    g0 = b2 / rho
    prm[F_GAMMA0] = g0
    prm[F_GAMMA1] = g1
    if beta1 - beta0 >= delta:
        prm[F_CASE] = CASE_M3
        lzl = -math.inf
        lzc = -math.inf
        lzr = -math.inf
        # left: [a1, min(gamma1, b1)], Phi argument stays <= 0
        l_hi = min(g1, b1)
        prm[F_L_HI] = l_hi
        if l_hi > a1:
            zmin = alpha * a1 + beta1
            zmax = min(alpha * l_hi + beta1, 0.0)
            tight = left_rule == LEFT_MIN_MASS
            log_c = math.log(c_fun(zmax)) if tight else math.log(SQRT_PI_2)
            lz_u, m_u = _side_mass(rho, nu, a2, 0.0, log_c, a1, l_hi)
            log_d = log_d_fun(min(zmin, 0.0))
            lz_t, m_t = _side_mass(rho, nu, a2, TILT, log_d, a1, l_hi)
            if left_rule == LEFT_LITERAL:
                kind = BOUND_TILT if max(b1, g1) > 0.0 else BOUND_FLAT
            elif left_rule == LEFT_REACH:
                kind = BOUND_TILT if alpha * l_hi + beta1 > -X_D else BOUND_FLAT
            else:
                kind = BOUND_TILT if lz_t < lz_u else BOUND_FLAT
            if kind == BOUND_TILT:
                lzl, lam, log_k, m_l = lz_t, TILT, log_d, m_t
            else:
                lzl, lam, log_k, m_l = lz_u, 0.0, log_c, m_u
            if tight:
                lam_s, log_ks = _secant(zmin, zmax)
                lz_s, m_s = _side_mass(rho, nu, a2, lam_s, log_ks, a1, l_hi)
                if lz_s < lzl:
                    kind, lzl, lam, log_k, m_l = BOUND_SECANT, lz_s, lam_s, log_ks, m_s
            prm[F_L_KIND] = kind
            prm[F_L_LAMBDA] = lam
            prm[F_L_LOGK] = log_k
            prm[F_L_MEAN] = m_l
        # centre: [max(gamma1, a1), min(gamma0, b1)]
        c_lo = max(g1, a1)
        c_hi = min(g0, b1)
        prm[F_C_LO] = c_lo
        prm[F_C_HI] = c_hi
        log_top = log_Phi_diff(-prm[F_UPS], prm[F_UPS])
        prm[F_C_LOGK] = log_top
        if c_hi > c_lo:
            lzc = log_top + log_Phi_diff(c_lo, c_hi)
        # right: [max(gamma0, a1), b1], argument of Phi(-alpha x - beta0) <= 0
        r_lo = max(g0, a1)
        prm[F_R_LO] = r_lo
        prm[F_R_MEAN] = rho * b2
        if b1 > r_lo:
            # Phi argument w = -(alpha x + beta0) falls from w_hi to w_lo
            w_hi = min(-alpha * r_lo - beta0, 0.0)
            w_lo = min(-alpha * b1 - beta0, w_hi)
            log_cr = math.log(c_fun(w_hi)) if left_rule == LEFT_MIN_MASS else math.log(SQRT_PI_2)
            lzr, m_r = _side_mass(rho, nu, b2, 0.0, log_cr, r_lo, b1)
            lam_r = 0.0
            kind = BOUND_FLAT
            if left_rule == LEFT_MIN_MASS:
                lam_s, log_ks = _secant(w_lo, w_hi)
                lz_s, m_s = _side_mass(rho, nu, b2, -lam_s, log_ks, r_lo, b1)
                if lz_s < lzr:
                    kind, lzr, lam_r, log_cr, m_r = BOUND_SECANT, lz_s, lam_s, log_ks, m_s
            prm[F_R_KIND] = kind
            prm[F_R_LAMBDA] = lam_r
            prm[F_R_LOGK] = log_cr
            prm[F_R_MEAN] = m_r
        prm[F_LZL] = lzl
        prm[F_LZC] = lzc
        prm[F_LZR] = lzr
        pl, pc = _mix3(lzl, lzc, lzr)
        prm[F_PL] = pl
        prm[F_PC] = pc
        prm[F_LOGZ] = _log_add(_log_add(lzl, lzc), lzr)
        return prm
    prm[F_CASE] = CASE_T
    v, w = tangent_points_k(a1, b1, alpha, beta0, beta1)
    sv = xi_prime_k(v, alpha, beta0, beta1)
    xv = xi_k(v, alpha, beta0, beta1)
    prm[F_V] = v
    prm[F_W] = w
    prm[F_SV] = sv
    prm[F_XIV] = xv
    if w == v:
        prm[F_W] = v
        prm[F_SW] = sv
        prm[F_XIW] = xv
        prm[F_CROSS] = b1
        prm[F_P1] = 1.0
        prm[F_LOGZ] = xv + sv * (a1 - v) + _log_exp_integral(sv, b1 - a1)
        return prm
    sw = xi_prime_k(w, alpha, beta0, beta1)
    xw = xi_k(w, alpha, beta0, beta1)
    cross = (xw - xv - sw * w + sv * v) / (sv - sw)
    cross = min(max(cross, v), w)
    prm[F_SW] = sw
    prm[F_XIW] = xw
    prm[F_CROSS] = cross
    lm1 = xv + sv * (a1 - v) + _log_exp_integral(sv, cross - a1) if cross > a1 else -math.inf
    lm2 = xw + sw * (cross - w) + _log_exp_integral(sw, b1 - cross) if b1 > cross else -math.inf
    if lm1 == -math.inf:
        prm[F_P1] = 0.0
    elif lm2 == -math.inf:
        prm[F_P1] = 1.0
    else:
        prm[F_P1] = 1.0 / (1.0 + math.exp(lm2 - lm1))
    prm[F_LOGZ] = _log_add(lm1, lm2)
    return prm


@njit(cache=True)
def log_envelope_k(prm, x):
    """log of the unnormalised proposal density at x in [a1, b1]."""
    case = int(prm[F_CASE])
    if case == CASE_T:
        lv = prm[F_XIV] + prm[F_SV] * (x - prm[F_V])
        lw = prm[F_XIW] + prm[F_SW] * (x - prm[F_W])
        return min(lv, lw)
    base = -0.5 * x * x - LOG_SQRT_2PI
    if case == CASE_INDEP:
        return base
    alpha = prm[F_ALPHA]
    if x < prm[F_C_LO]:
        z = alpha * x + prm[F_BETA1]
        return base - 0.5 * z * z - LOG_SQRT_2PI + prm[F_L_LAMBDA] * z + prm[F_L_LOGK]
    if x <= prm[F_C_HI]:
        return base + prm[F_C_LOGK]
    w = -(alpha * x + prm[F_BETA0])
    return base - 0.5 * w * w - LOG_SQRT_2PI + prm[F_R_LAMBDA] * w + prm[F_R_LOGK]


@njit(cache=True)
def log_target_k(prm, x):
    """log phi(x) kappa(x) (or log phi(x) when rho = 0)."""
    if int(prm[F_CASE]) == CASE_INDEP:
        return -0.5 * x * x - LOG_SQRT_2PI
    return xi_k(x, prm[F_ALPHA], prm[F_BETA0], prm[F_BETA1])


@njit(cache=True)
def propose_k(gen, prm, tab, cnt, want_prob):
    """One proposal.  Returns (accepted, x1, x2, acceptance probability)."""
    a1 = prm[F_A1]
    b1 = prm[F_B1]
    a2 = prm[F_A2]
    b2 = prm[F_B2]
    rho = prm[F_RHO]
    nu = prm[F_NU]
    case = int(prm[F_CASE])
    cnt[C.BIV_PROPOSALS] += 1
    if case == CASE_INDEP:
        x1 = tn_k(gen, 0.0, 1.0, a1, b1, tab, K_MIN, cnt)
        x2 = tn_k(gen, 0.0, 1.0, a2, b2, tab, K_MIN, cnt)
        cnt[C.BIV_ACCEPTS] += 1
        return True, x1, x2, 1.0
    if case == CASE_M3:
        u = gen.random()
        if u < prm[F_PL]:
            cnt[C.COMP_1] += 1
            x1 = tn_k(gen, prm[F_L_MEAN], nu, a1, prm[F_L_HI], tab, K_MIN, cnt)
        elif u < prm[F_PC]:
            cnt[C.COMP_2] += 1
            x1 = tn_k(gen, 0.0, 1.0, prm[F_C_LO], prm[F_C_HI], tab, K_MIN, cnt)
        else:
            cnt[C.COMP_3] += 1
            x1 = tn_k(gen, prm[F_R_MEAN], nu, prm[F_R_LO], b1, tab, K_MIN, cnt)
    else:
        if gen.random() < prm[F_P1]:
            cnt[C.COMP_1] += 1
            x1 = trunc_exp_u(a1, prm[F_CROSS], -prm[F_SV], gen.random())
        else:
            cnt[C.COMP_2] += 1
            x1 = trunc_exp_u(prm[F_CROSS], b1, -prm[F_SW], gen.random())
    log_ratio = log_target_k(prm, x1) - log_envelope_k(prm, x1)
    prob = math.exp(log_ratio) if want_prob else math.nan
    if want_prob and prob > 1.0 + 1e-9:
        raise ValueError("acceptance probability above one")
    if math.log1p(-gen.random()) > log_ratio:
        return False, x1, math.nan, prob
    x2 = tn_k(gen, rho * x1, nu, a2, b2, tab, K_MIN, cnt)
    cnt[C.BIV_ACCEPTS] += 1
    return True, x1, x2, prob


@njit(cache=True)
def sample_k(gen, prm, tab, cnt):
    while True:
        ok, x1, x2, _ = propose_k(gen, prm, tab, cnt, False)
        if ok:
            return x1, x2


@njit(cache=True)
def fill_k(gen, prm, tab, cnt, out):
    for m in range(out.shape[0]):
        x1, x2 = sample_k(gen, prm, tab, cnt)
        out[m, 0] = x1
        out[m, 1] = x2


@njit(cache=True)
def acceptance_run_k(gen, prm, n_prop, tab, cnt):
    acc = 0
    psum = 0.0
    for _ in range(n_prop):
        ok, _x1, _x2, p = propose_k(gen, prm, tab, cnt, True)
        acc += ok
        psum += p
    return acc, psum


# --------------------------------------------------------------------------
# Python API


@dataclass(frozen=True)
class Transform:
    """canonical = swap(signs * original); ``to_original`` inverts it."""

    sign1: float = 1.0
    sign2: float = 1.0
    swap: bool = False

    def to_original(self, y1, y2):
        if self.swap:
            y1, y2 = y2, y1
        return self.sign1 * y1, self.sign2 * y2

    @property
    def is_identity(self) -> bool:
        return self.sign1 == 1.0 and self.sign2 == 1.0 and not self.swap


@dataclass(frozen=True)
class FiniteGeometry:
    alpha: float
    beta0: float
    beta1: float
    gamma0: float
    gamma1: float
    upsilon: float
    delta: float = DELTA


@dataclass(frozen=True)
class FiniteProblem:
    rho: float
    a1: float
    b1: float
    a2: float
    b2: float
    transform: Transform = Transform()

    def __post_init__(self):
        vals = (self.rho, self.a1, self.b1, self.a2, self.b2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("finite box problems need finite parameters")
        if abs(self.rho) >= RHO_LIMIT:
            raise ValueError(f"rho must satisfy |rho| < {RHO_LIMIT!r}")
        if not (self.a1 < self.b1 and self.a2 < self.b2):
            raise ValueError("box must be nonempty: a1 < b1 and a2 < b2")

    @property
    def is_canonical(self) -> bool:
        return self.rho >= 0.0 and self.b2 >= 0.0 and (self.a2 >= self.a1 or self.b1 <= 0.0)

    @property
    def nu(self) -> float:
        return math.sqrt((1.0 - self.rho) * (1.0 + self.rho))

    def geometry(self, delta: float = DELTA) -> FiniteGeometry:
        nu = self.nu
        alpha = self.rho / nu
        b1, b0 = -self.a2 / nu, -self.b2 / nu
        g0 = -b0 / alpha if alpha > 0 else math.inf
        g1 = -b1 / alpha if alpha > 0 else math.inf
        return FiniteGeometry(alpha, b0, b1, g0, g1, 0.5 * (b1 - b0), delta)

    def params(self, delta: float = DELTA, left_rule: int = DEFAULT_LEFT_RULE) -> np.ndarray:
        if not self.is_canonical:
            raise ValueError("params() needs a canonical problem")
        return setup_k(self.rho, self.a1, self.b1, self.a2, self.b2, float(delta), int(left_rule))


def canonical_forms(rho: float, a1: float, b1: float, a2: float, b2: float) -> list[FiniteProblem]:
    """Every sign-flip/swap orientation satisfying rho >= 0, b2 >= 0 and
    (a2 >= a1 or b1 <= 0); at least one always exists."""
    rho, a1, b1, a2, b2 = map(float, (rho, a1, b1, a2, b2))
    FiniteProblem(rho, a1, b1, a2, b2)  # validates the raw input
    s2 = 1.0
    if rho < 0.0:
        rho, a2, b2, s2 = -rho, -b2, -a2, -1.0
    out = []
    for both in (False, True):
        if both:
            i1, i2 = (-b1, -a1), (-b2, -a2)
            sg1, sg2 = -1.0, -s2
        else:
            i1, i2 = (a1, b1), (a2, b2)
            sg1, sg2 = 1.0, s2
        for swap in (False, True):
            (c1, d1), (c2, d2) = (i2, i1) if swap else (i1, i2)
            if d2 >= 0.0 and (c2 >= c1 or d1 <= 0.0):
                out.append(FiniteProblem(rho, c1, d1, c2, d2, Transform(sg1, sg2, swap)))
    if not out:
        raise AssertionError("no canonical orientation found")
    return out


def canonicalize(rho: float, a1: float, b1: float, a2: float, b2: float,
                 delta: float = DELTA, left_rule: int = DEFAULT_LEFT_RULE) -> FiniteProblem:
    """Canonical orientation with the smallest envelope mass.

    The target mass is the box probability in every orientation, so the
    smallest envelope mass is the highest acceptance rate.
    """
    forms = canonical_forms(rho, a1, b1, a2, b2)
    if len(forms) == 1:
        return forms[0]
    return min(forms, key=lambda f: f.params(delta, left_rule)[F_LOGZ])


def classify_finite(g: FiniteGeometry) -> FiniteCase:
    return FiniteCase.T if g.beta1 - g.beta0 < g.delta else FiniteCase.M3


def kappa(x1: float, g: FiniteGeometry) -> float:
    return kappa_k(float(x1), g.alpha, g.beta0, g.beta1)


def xi(x1: float, g: FiniteGeometry) -> float:
    return xi_k(float(x1), g.alpha, g.beta0, g.beta1)


def xi_prime(x1: float, g: FiniteGeometry) -> float:
    return xi_prime_k(float(x1), g.alpha, g.beta0, g.beta1)


def m3_weights(p: FiniteProblem, delta: float = DELTA,
               left_rule: int = DEFAULT_LEFT_RULE) -> tuple[float, float, float]:
    """Unnormalised (zeta_l, zeta_c, zeta_r) of a canonical M3 problem."""
    prm = p.params(delta, left_rule)
    if int(prm[F_CASE]) != CASE_M3:
        raise ValueError("problem is not in case M3")
    return tuple(math.exp(prm[k]) for k in (F_LZL, F_LZC, F_LZR))


_KIND_NAMES = {BOUND_FLAT: "flat", BOUND_TILT: "tilt", BOUND_SECANT: "secant"}


def envelope_description(prm: np.ndarray, left_rule: int = DEFAULT_LEFT_RULE) -> dict:
    """Plain description of the envelope a parameter block uses (oracle input)."""
    case = int(prm[F_CASE])
    if case == CASE_T:
        return {"case": "T", "v": float(prm[F_V]), "w": float(prm[F_W])}
    if case == CASE_M3:
        return {"case": "M3", "left": _KIND_NAMES[int(prm[F_L_KIND])],
                "right": _KIND_NAMES[int(prm[F_R_KIND])],
                "tight": left_rule == LEFT_MIN_MASS}
    return {"case": "Indep"}


@dataclass(frozen=True)
class TangentEnvelope:
    v: float
    w: float
    slope_v: float
    slope_w: float
    xi_v: float
    xi_w: float
    crossing: float
    p_first: float

    def __call__(self, x: float) -> float:
        return min(self.xi_v + self.slope_v * (x - self.v), self.xi_w + self.slope_w * (x - self.w))


def build_tangent_envelope(p: FiniteProblem, delta: float = DELTA) -> TangentEnvelope:
    prm = p.params(delta, DEFAULT_LEFT_RULE)
    if int(prm[F_CASE]) != CASE_T:
        raise ValueError("problem is not in case T")
    return TangentEnvelope(prm[F_V], prm[F_W], prm[F_SV], prm[F_SW],
                           prm[F_XIV], prm[F_XIW], prm[F_CROSS], prm[F_P1])


def _resolve(stream, table, counters):
    if stream is None:
        stream = RandomStream(0)
    if table is None:
        table = default_table()
    cnt = counters.array if counters is not None else C.new()
    return stream, table, cnt


def sample(p: FiniteProblem, stream: RandomStream | None = None,
           table: RegionTable | None = None, counters: C.Counters | None = None,
           delta: float = DELTA, left_rule: int = DEFAULT_LEFT_RULE,
           ) -> tuple[float, float, int]:
    """One exact draw in original coordinates; returns (x1, x2, proposals)."""
    stream, table, cnt = _resolve(stream, table, counters)
    before = cnt[C.BIV_PROPOSALS]
    y1, y2 = sample_k(stream.gen, p.params(delta, left_rule), table.packed, cnt)
    x1, x2 = p.transform.to_original(y1, y2)
    return float(x1), float(x2), int(cnt[C.BIV_PROPOSALS] - before)


def sample_many(p: FiniteProblem, n: int, stream: RandomStream | None = None,
                table: RegionTable | None = None, counters: C.Counters | None = None,
                delta: float = DELTA, left_rule: int = DEFAULT_LEFT_RULE) -> np.ndarray:
    stream, table, cnt = _resolve(stream, table, counters)
    out = np.empty((int(n), 2))
    fill_k(stream.gen, p.params(delta, left_rule), table.packed, cnt, out)
    t = p.transform
    if t.swap:
        out = out[:, ::-1].copy()
    out[:, 0] *= t.sign1
    out[:, 1] *= t.sign2
    return out


def sample_m3(p, stream=None, table=None, counters=None):
    if classify_finite(p.geometry()) != FiniteCase.M3 or p.rho == 0.0:
        raise ValueError("problem is not in case M3")
    return sample(p, stream, table, counters)[:2]


def sample_t(p, stream=None, table=None, counters=None):
    if classify_finite(p.geometry()) != FiniteCase.T or p.rho == 0.0:
        raise ValueError("problem is not in case T")
    return sample(p, stream, table, counters)[:2]


def empirical_acceptance(p: FiniteProblem, n_prop: int, stream: RandomStream | None = None,
                         table: RegionTable | None = None,
                         counters: C.Counters | None = None,
                         delta: float = DELTA,
                         left_rule: int = DEFAULT_LEFT_RULE) -> tuple[float, float]:
    """(accepted fraction, mean acceptance probability) over ``n_prop`` proposals."""
    stream, table, cnt = _resolve(stream, table, counters)
    acc, psum = acceptance_run_k(stream.gen, p.params(delta, left_rule), int(n_prop),
                                 table.packed, cnt)
    return acc / n_prop, psum / n_prop
