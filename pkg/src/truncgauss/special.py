"""Gaussian density, CDF, quantile and the Mills-ratio helpers.

Everything here is a numba ``njit`` function so the samplers can inline it;
the same functions are callable from plain Python with scalar arguments.

``Phi`` goes through ``math.erfc`` (the platform libm, ~1 ulp), which keeps
full relative accuracy in the left tail.  ``Phi_inv`` is Wichura's AS241
(PPND16) followed by one Halley step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from . import counters as C
from ._packed import M_AMAX, M_AMIN, M_H, M_KHI, M_KLO, M_N, M_V

SQRT_2PI = math.sqrt(2.0 * math.pi)
INV_SQRT_2PI = 1.0 / SQRT_2PI
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT_PI_2 = math.sqrt(math.pi / 2.0)
SQRT_2_PI = math.sqrt(2.0 / math.pi)
INV_SQRT2 = 1.0 / math.sqrt(2.0)

#: exponential tilt shared by chi, d_fun and the tilted mixture components
TILT = 0.68

#: below this |z| the asymptotic tail brackets are not used
TAIL_WINDOW = 2.0


@njit(cache=True)
def phi(x):
    return math.exp(-0.5 * x * x) * INV_SQRT_2PI


@njit(cache=True)
def Phi(x):
    return 0.5 * math.erfc(-x * INV_SQRT2)


@njit(cache=True)
def _ppnd16(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@njit(cache=True)
def Phi_inv(p):
    if not (p > 0.0 and p < 1.0):
        raise ValueError("Phi_inv: p must lie in (0, 1)")
    x = _ppnd16(p)
    # one Halley step; in the lower half the residual keeps relative accuracy
    if p < 0.5:
        e = Phi(x) - p
    else:
        e = (1.0 - p) - Phi(-x)
    if abs(x) < 37.0:
        u = e * SQRT_2PI * math.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    return x


@njit(cache=True)
def _mills_cf(x):
    # continued fraction for Phi(-x)/phi(x), accurate for x >= 30
    f = x
    for k in range(40, 0, -1):
        f = x + k / f
    return 1.0 / f


@njit(cache=True)
def psi(x):
    """Mills ratio Phi(-x) / phi(x)."""
    if x >= 30.0:
        return _mills_cf(x)
    return 0.5 * math.erfc(x * INV_SQRT2) * SQRT_2PI * math.exp(0.5 * x * x)


@njit(cache=True)
def log_Phi(z):
    if z > 0.0:
        return math.log1p(-Phi(-z))
    if z > -30.0:
        return math.log(Phi(z))
    return math.log(psi(-z)) - 0.5 * z * z - LOG_SQRT_2PI


@njit(cache=True)
def c_fun(x0):
    if x0 > 0.0:
        raise ValueError("c_fun: argument must be <= 0")
    if x0 == 0.0:
        return SQRT_PI_2
    return min(SQRT_PI_2, -1.0 / x0)


@njit(cache=True)
def chi(x):
    return math.exp(TILT * x) * psi(x)


@njit(cache=True)
def d_fun(x0):
    if x0 > 0.0:
        raise ValueError("d_fun: argument must be <= 0")
    return max(SQRT_PI_2, chi(-x0))


@njit(cache=True)
def log_Phi_diff(lo, hi):
    """log(Phi(hi) - Phi(lo)) for lo < hi without cancellation in either tail."""
    if not lo < hi:
        return -math.inf
    if lo >= 0.0:
        # both in the right tail: Phi(-lo) - Phi(-hi)
        big = log_Phi(-lo)
        return big + math.log1p(-math.exp(log_Phi(-hi) - big))
    if hi <= 0.0:
        big = log_Phi(hi)
        return big + math.log1p(-math.exp(log_Phi(lo) - big))
    return math.log1p(-Phi(lo) - Phi(-hi))


@njit(cache=True)
def log_chi(x):
    """log chi(x) for x >= 0; finite where chi itself overflows."""
    return TILT * x + math.log(psi(x))


@njit(cache=True)
def log_d_fun(x0):
    if x0 > 0.0:
        raise ValueError("log_d_fun: argument must be <= 0")
    return max(math.log(SQRT_PI_2), log_chi(-x0))


def _golden_min(f, lo, hi, tol=1e-12):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    while b - a > tol:
        if f(c) < f(d):
            b = d
        else:
            a = c
        c, d = b - g * (b - a), a + g * (b - a)
    return 0.5 * (a + b)


def _bisect(f, lo, hi, tol=1e-13):
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0.0) == (flo > 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


#: argmin of chi on [0, inf); chi decreases before it and increases after
CHI_ARGMIN = _golden_min(chi, 0.0, 10.0)
#: chi(X_D) = 2 min chi, so chi(x) / chi(x') >= 1/2 on [0, X_D]
X_D = _bisect(lambda x: chi(x) - 2.0 * chi(CHI_ARGMIN), CHI_ARGMIN, 10.0)
#: Phi^{-1}(1/3), the S+/S- switch point for negative correlation
PHI_INV_THIRD = Phi_inv(1.0 / 3.0)


# --------------------------------------------------------------------------
# cheap brackets on Phi


@njit(cache=True)
def Phi_upper_tail(z):
    if not z < 0.0:
        raise ValueError("Phi_upper_tail: z must be negative")
    w = 1.0 / (z * z)
    return -phi(z) / z * (1.0 - w + 3.0 * w * w)


@njit(cache=True)
def Phi_lower_tail(z):
    if not z < 0.0:
        raise ValueError("Phi_lower_tail: z must be negative")
    w = 1.0 / (z * z)
    return -phi(z) / z * (1.0 - w + 3.0 * w * w - 15.0 * w * w * w)


@njit(cache=True)
def _table_index(z, tab):
    """Global region index j_{floor(z/h)}, or a sentinel below -N-1."""
    meta = tab[6]
    if z < meta[M_AMIN] or z > meta[M_AMAX]:
        return -(1 << 40)
    h = meta[M_H]
    k = math.floor(z / h)
    if k * h > z:
        k -= 1
    klo = int(meta[M_KLO])
    khi = int(meta[M_KHI])
    if k < klo:
        k = klo
    if k > khi:
        k = khi
    return int(tab[5][int(k) - klo])


@njit(cache=True)
def _table_upper(z, tab):
    """A(j_{floor(z/h)} + 1) or -1.0 if z is outside the lookup window."""
    j = _table_index(z, tab)
    if j < -(1 << 39):
        return -1.0
    meta = tab[6]
    return (j + 1 + meta[M_N] + 2.0) * meta[M_V]


@njit(cache=True)
def _table_lower(z, tab):
    """1 - A(j_{floor(-z/h)} + 1) or 2.0 if -z is outside the lookup window."""
    u = _table_upper(-z, tab)
    if u < 0.0:
        return 2.0
    return 1.0 - u


@njit(cache=True)
def _tail_verdict(z, t, early):
    """Compare Phi(z) with t using the asymptotic bracket (|z| >= 2).

    Returns 1 (Phi(z) >= t), 0 (Phi(z) < t) or -1 (undecided).
    """
    if z < 0.0:
        zz = z
        flip = False
    else:
        zz = -z
        flip = True
    # for z > 0 compare Phi(-z) = 1 - Phi(z) with 1 - t, verdict reversed
    tt = 1.0 - t if flip else t
    w = 1.0 / (zz * zz)
    lead = -phi(zz) / zz
    s1 = lead
    s2 = lead * (1.0 - w)
    s3 = lead * (1.0 - w + 3.0 * w * w)
    s4 = lead * (1.0 - w + 3.0 * w * w - 15.0 * w * w * w)
    # partial sums alternate around Phi(zz): s1, s3 above; s2, s4 below
    bnd = 0.0
    if early and s1 < tt:
        below = True
    elif early and s2 >= tt:
        below = False
        bnd = s2
    elif s3 < tt:
        below = True
    elif s4 >= tt:
        below = False
        bnd = s4
    else:
        return -1
    # "below" refers to Phi(zz) < tt
    if flip:
        # Phi(z) = 1 - Phi(zz) >= t  iff  Phi(zz) <= 1 - t; ties go to exact
        if below:
            return 1
        return 0 if bnd > tt else -1
    return 0 if below else 1


@njit(cache=True)
def lazy_compare(z, t, tab, early, cnt):
    """Decide Phi(z) >= t, touching the exact CDF only when brackets overlap.

    Returns 1/0 for the verdict, plus 2 when the exact value was needed.
    """
    cnt[C.PHI_LAZY] += 1
    if t <= 0.0:
        return 1
    if t > 1.0:
        return 0
    up = _table_upper(z, tab)
    if up >= 0.0 and up < t:
        return 0
    lo = _table_lower(z, tab)
    if lo <= 1.0 and lo >= t:
        return 1
    if abs(z) >= TAIL_WINDOW:
        v = _tail_verdict(z, t, early)
        if v >= 0:
            return v
    cnt[C.PHI_EXACT] += 1
    return 3 if Phi(z) >= t else 2


# --------------------------------------------------------------------------
# Python-facing wrappers


class Verdict(Enum):
    BelowThreshold = 0
    AboveThreshold = 1


@dataclass(frozen=True)
class LazyCompareOutcome:
    verdict: Verdict
    used_exact: bool


@dataclass(frozen=True)
class PhiBoundsContext:
    """Table-backed bracket on Phi; see :func:`Phi_upper_table`."""

    table: object  # RegionTable
    early_exit: bool = True

    @property
    def a_min(self) -> float:
        return self.table.a_min

    @property
    def a_max(self) -> float:
        return self.table.a_max

    @property
    def h(self) -> float:
        return self.table.h


def Phi_upper_table(z: float, ctx: PhiBoundsContext) -> float:
    """Upper bound A(j_{floor(z/h)} + 1) >= Phi(z).

    Raises ``ValueError`` outside the lookup window; callers fall back to
    the tail brackets there.
    """
    v = _table_upper(float(z), ctx.table.packed)
    if v < 0.0:
        raise ValueError("z outside the table window")
    return v


def Phi_lower_table(z: float, ctx: PhiBoundsContext) -> float:
    v = _table_lower(float(z), ctx.table.packed)
    if v > 1.0:
        raise ValueError("-z outside the table window")
    return v


def lazy_phi_at_least(z: float, t: float, ctx: PhiBoundsContext,
                      cnt: np.ndarray | None = None) -> LazyCompareOutcome:
    if cnt is None:
        cnt = C.new()
    r = lazy_compare(float(z), float(t), ctx.table.packed, ctx.early_exit, cnt)
    return LazyCompareOutcome(Verdict(r & 1), bool(r & 2))
