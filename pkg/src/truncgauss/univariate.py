"""One-dimensional truncated normal samplers.

Kernels (suffix ``_k``) are numba functions taking a numpy ``Generator``, the
packed region table and an ``int64`` counter array.  The Python functions at
the bottom wrap them for scalar use and for batch draws.

Table sampler outline for ``[a, inf)`` with ``i_a = j_{floor(a/h)}``:

* draw a region ``i`` uniformly in ``i_a .. N``;
* ``i == N``: exponential rejection from ``x_N``;
* ``i`` is one of the two leftmost regions: plain rejection inside the
  rectangle plus the ``x >= a`` check;
* otherwise draw ``u``; if ``u <= ylow_i / y_i`` return ``x_i + delta_i * u``
  (no density evaluation), else finish the rejection step with a fresh ``x``.

Every rejection goes back to the region draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import counters as C
from ._packed import M_AMAX, M_AMIN, M_ILO, M_N, M_XN
from .rng import RandomStream, lemire_threshold, raw64_k
from .special import Phi, Phi_inv, _table_index, phi

ALG_TABLE = 0
ALG_DEVROYE = 1
ALG_GEWEKE_ROBERT = 2
ALG_INVERSE = 3
ALG_NAIVE = 4

ALGORITHMS = {
    "table": ALG_TABLE,
    "devroye": ALG_DEVROYE,
    "geweke-robert": ALG_GEWEKE_ROBERT,
    "inverse": ALG_INVERSE,
    "naive": ALG_NAIVE,
}

#: below this |rate| * width the exponential proposal is treated as flat
_FLAT = 1e-12
#: two-sided naive rejection refuses intervals lighter than this
NAIVE_MASS_GUARD = 1e-6


@dataclass(frozen=True)
class SamplerConfig:
    a0: float = 0.65
    k_min: int = 5

    def __post_init__(self):
        if not self.a0 > 0.0:
            raise ValueError("a0 must be positive")
        if self.k_min < 1:
            raise ValueError("k_min must be >= 1")


@dataclass(frozen=True)
class UnivariateSpec:
    a: float
    b: float = math.inf
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if not self.a < self.b:
            raise ValueError("need a < b")

    @property
    def standardized(self) -> tuple[float, float]:
        return (self.a - self.mu) / self.sigma, (self.b - self.mu) / self.sigma


# --------------------------------------------------------------------------
# baseline kernels


@njit(cache=True)
def inverse_transform_u(a, u):
    p = Phi(-a) * u
    if not p > 0.0:
        return math.inf
    return -Phi_inv(p)


@njit(cache=True)
def inverse_transform_k(gen, a):
    return inverse_transform_u(a, 1.0 - gen.random())


@njit(cache=True)
def _exp1(gen):
    # inversion; numba's ziggurat exponential stalls the table loop once inlined
    return -math.log(1.0 - gen.random())


@njit(cache=True)
def devroye_k(gen, a, b):
    """Exponential proposal with rate a (> 0), rejecting draws above b."""
    while True:
        z = _exp1(gen) / a
        if 2.0 * _exp1(gen) >= z * z and a + z <= b:
            return a + z


@njit(cache=True)
def geweke_robert_k(gen, a):
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        x = a + _exp1(gen) / lam
        z = x - lam
        if 2.0 * _exp1(gen) >= z * z:
            return x


@njit(cache=True)
def naive_k(gen, a, b):
    while True:
        x = gen.standard_normal()
        if a <= x <= b:
            return x


@njit(cache=True)
def trunc_exp_u(a, b, rate, u):
    """Inverse CDF of the density proportional to exp(-rate x) on [a, b]."""
    w = b - a
    if abs(rate) * w < _FLAT:
        return a + w * u
    if rate > 0.0:
        x = a - math.log1p(u * math.expm1(-rate * w)) / rate
        return min(x, b)
    x = b - math.log1p(u * math.expm1(rate * w)) / rate
    return max(x, a)


@njit(cache=True)
def trunc_exp_k(gen, a, b, rate):
    return trunc_exp_u(a, b, rate, gen.random())


@njit(cache=True)
def interval_texp_k(gen, a, b, cnt):
    """Exponential-proposal rejection on a bounded [a, b]."""
    lam = a if b > 0.0 else b
    while True:
        cnt[C.UNI_TEXP] += 1
        x = trunc_exp_k(gen, a, b, lam)
        z = x - lam
        if 2.0 * _exp1(gen) >= z * z:
            return x


# --------------------------------------------------------------------------
# table kernels
#
# numba inlines aggressively, and a nested loop or an integer division inside
# the region loop slows every draw about threefold.  Branch selection, the
# region range and the Lemire threshold are therefore resolved once by
# plan_k; batch fills then run one tight loop per branch.

P_TABLE = 0
P_NAIVE = 1
P_DEVROYE = 2
P_TEXP = 3
P_NORMAL = 4

_LOW32 = 4294967295
_TWO_M32 = 2.0 ** -32


@njit(cache=True)
def _table_loop(gen, a, b, i_a, i_hi, check_hi, thresh, tab, cnt):
    x, y, ylow, d = tab[0], tab[1], tab[2], tab[3]
    rows = tab[7]
    meta = tab[6]
    n = int(meta[M_N])
    ilo = int(meta[M_ILO])
    xn = meta[M_XN]
    r = i_hi - i_a + 1
    left_edge = i_a + 1
    right_edge = i_hi - 1 if check_hi else n + 1
    in_tail = False
    while True:
        if in_tail:
            z = _exp1(gen) / xn
            if 2.0 * _exp1(gen) < z * z:
                continue
            in_tail = False
            # region N keeps weight v, so a draw above b restarts the region choice
            if xn + z <= b:
                cnt[C.UNI_TAIL] += 1
                return xn + z
            continue
        # one 64-bit word: the high half picks the region (Lemire, exact
        # rejection), the independent low half is the fast-path uniform
        w = raw64_k(gen)
        m = np.int64(w >> np.uint64(32)) * r
        if (m & _LOW32) < thresh:
            continue
        cnt[C.UNI_PROPOSALS] += 1
        i = i_a + (m >> 32)
        if i == n:
            in_tail = True
            continue
        k = i - ilo
        u = np.int64(w & np.uint64(_LOW32)) * _TWO_M32
        if i <= left_edge or i >= right_edge:
            s = x[k] + d[k] * u
            if s < a or s > b:
                continue
            t = y[k] * gen.random()
            if t <= ylow[k] or t <= phi(s):
                cnt[C.UNI_EDGE] += 1
                return s
            continue
        if u <= rows[k, 1]:
            cnt[C.UNI_FAST] += 1
            return rows[k, 0] + rows[k, 2] * u
        s = x[k] + d[k] * gen.random()
        if u * y[k] <= phi(s):
            cnt[C.UNI_SLOW] += 1
            return s


@njit(cache=True)
def _upper_region(b, tab):
    """Region holding b or the one after it (in window); exact region above a_max."""
    meta = tab[6]
    n = int(meta[M_N])
    x = tab[0]
    ilo = int(meta[M_ILO])
    if b <= meta[M_AMAX]:
        i = _table_index(b, tab)
        # index lookup may land one region short
        if x[i + 1 - ilo] <= b:
            i += 1
        return i
    if b >= meta[M_XN]:
        return n
    i = _table_index(meta[M_AMAX], tab)
    while x[i + 1 - ilo] <= b:
        i += 1
    return i


@njit(cache=True)
def plan_k(a, b, tab, k_min):
    """Resolve how TN[a, b] is drawn.

    Returns ``(mode, sign, lo, hi, i_a, i_hi, check_hi, thresh)``; the draw is
    ``sign * X`` with X on [lo, hi].
    """
    meta = tab[6]
    n = int(meta[M_N])
    sign = 1.0
    if a == -math.inf:
        if b == math.inf:
            return P_NORMAL, 1.0, a, b, 0, 0, False, 0
        a, b, sign = -b, math.inf, -1.0
    if a < meta[M_AMIN]:
        if b > -meta[M_AMIN]:
            # [a, b] covers [a_min, -a_min]: mass above 0.95
            return P_NAIVE, sign, a, b, 0, 0, False, 0
        a, b, sign = -b, -a, -sign
    if a > meta[M_AMAX]:
        if b == math.inf:
            return P_DEVROYE, sign, a, b, 0, 0, False, 0
        return P_TEXP, sign, a, b, 0, 0, False, 0
    i_a = _table_index(a, tab)
    # one edge comparison turns the lookup into the exact region of a
    if tab[0][i_a + 1 - int(meta[M_ILO])] <= a:
        i_a += 1
    if b == math.inf:
        i_hi = n
        check_hi = False
    else:
        i_hi = min(_upper_region(b, tab), n)
        check_hi = True
        if i_hi - i_a <= k_min:
            return P_TEXP, sign, a, b, 0, 0, False, 0
    return P_TABLE, sign, a, b, i_a, i_hi, check_hi, lemire_threshold(i_hi - i_a + 1)


@njit(cache=True)
def draw_planned_k(gen, mode, sign, lo, hi, i_a, i_hi, check_hi, thresh, tab, cnt):
    if mode == P_TABLE:
        return sign * _table_loop(gen, lo, hi, i_a, i_hi, check_hi, thresh, tab, cnt)
    if mode == P_NAIVE:
        cnt[C.UNI_NAIVE] += 1
        return sign * naive_k(gen, lo, hi)
    if mode == P_DEVROYE:
        cnt[C.UNI_DEVROYE] += 1
        return sign * devroye_k(gen, lo, hi)
    if mode == P_TEXP:
        return sign * interval_texp_k(gen, lo, hi, cnt)
    return gen.standard_normal()


@njit(cache=True)
def sample_interval_k(gen, a, b, tab, k_min, cnt):
    """Standard normal restricted to [a, b]; either end may be infinite."""
    mode, sign, lo, hi, i_a, i_hi, check_hi, thresh = plan_k(a, b, tab, k_min)
    return draw_planned_k(gen, mode, sign, lo, hi, i_a, i_hi, check_hi, thresh, tab, cnt)


@njit(cache=True)
def sample_lower_k(gen, a, tab, cnt):
    return sample_interval_k(gen, a, math.inf, tab, 1, cnt)


@njit(cache=True)
def tn_k(gen, mu, sigma, a, b, tab, k_min, cnt):
    """N(mu, sigma^2) restricted to [a, b]."""
    z = sample_interval_k(gen, (a - mu) / sigma, (b - mu) / sigma, tab, k_min, cnt)
    # keep the destandardised draw inside the box despite rounding
    return min(max(mu + sigma * z, a), b)


# --------------------------------------------------------------------------
# batch fills: the branch is chosen in Python, one jitted loop per branch


@njit(cache=True)
def _fill_regions_k(gen, sign, a, b, i_a, i_hi, check_hi, thresh, tab, cnt, out):
    # same steps as _table_loop with the table reads hoisted out of the draw
    # loop, counters kept in locals and the fast path read from packed rows
    x, y, ylow, d = tab[0], tab[1], tab[2], tab[3]
    rows = tab[7]
    meta = tab[6]
    n = int(meta[M_N])
    ilo = int(meta[M_ILO])
    xn = meta[M_XN]
    r = i_hi - i_a + 1
    # regions i_a + 2 .. right_edge - 1 take the fast path; region N (tail)
    # is routed through the edge branch so the hot path skips that test
    hot_lo = i_a + 2
    right_edge = i_hi - 1 if check_hi else n
    hot_span = np.uint64(max(right_edge - hot_lo, 0))
    n_prop = 0
    n_fast = 0
    n_slow = 0
    n_edge = 0
    n_tail = 0
    for m in range(out.shape[0]):
        while True:
            w = raw64_k(gen)
            mm = np.int64(w >> np.uint64(32)) * r
            if (mm & _LOW32) < thresh:
                continue
            n_prop += 1
            i = i_a + (mm >> 32)
            k = i - ilo
            u = np.int64(w & np.uint64(_LOW32)) * _TWO_M32
            if np.uint64(i - hot_lo) >= hot_span:
                if i == n:
                    z = _exp1(gen) / xn
                    while 2.0 * _exp1(gen) < z * z:
                        z = _exp1(gen) / xn
                    if xn + z <= b:
                        n_tail += 1
                        out[m] = sign * (xn + z)
                        break
                    continue
                s = x[k] + d[k] * u
                if s < a or s > b:
                    continue
                t = y[k] * gen.random()
                if t <= ylow[k] or t <= phi(s):
                    n_edge += 1
                    out[m] = sign * s
                    break
                continue
            if u <= rows[k, 1]:
                n_fast += 1
                out[m] = sign * (rows[k, 0] + rows[k, 2] * u)
                break
            s = x[k] + d[k] * gen.random()
            if u * y[k] <= phi(s):
                n_slow += 1
                out[m] = sign * s
                break
    cnt[C.UNI_PROPOSALS] += n_prop
    cnt[C.UNI_FAST] += n_fast
    cnt[C.UNI_SLOW] += n_slow
    cnt[C.UNI_EDGE] += n_edge
    cnt[C.UNI_TAIL] += n_tail


@njit(cache=True)
def _fill_other_k(gen, mode, sign, lo, hi, cnt, out):
    nout = out.shape[0]
    if mode == P_NAIVE:
        cnt[C.UNI_NAIVE] += nout
        for m in range(nout):
            out[m] = sign * naive_k(gen, lo, hi)
    elif mode == P_DEVROYE:
        cnt[C.UNI_DEVROYE] += nout
        for m in range(nout):
            out[m] = sign * devroye_k(gen, lo, hi)
    elif mode == P_TEXP:
        for m in range(nout):
            out[m] = sign * interval_texp_k(gen, lo, hi, cnt)
    else:
        for m in range(nout):
            out[m] = gen.standard_normal()


def fill_table(gen, a, b, tab, k_min, cnt, out):
    mode, sign, lo, hi, i_a, i_hi, check_hi, thresh = plan_k(a, b, tab, k_min)
    if mode == P_TABLE:
        _fill_regions_k(gen, sign, lo, hi, i_a, i_hi, check_hi, thresh, tab, cnt, out)
    else:
        _fill_other_k(gen, mode, sign, lo, hi, cnt, out)


@njit(cache=True)
def fill_inverse_k(gen, a, out):
    for m in range(out.shape[0]):
        out[m] = inverse_transform_k(gen, a)


@njit(cache=True)
def fill_devroye_k(gen, a, out):
    for m in range(out.shape[0]):
        out[m] = devroye_k(gen, a, math.inf)


@njit(cache=True)
def fill_geweke_robert_k(gen, a, out):
    for m in range(out.shape[0]):
        out[m] = geweke_robert_k(gen, a)


def fill_baseline(gen, alg, a, a0, out):
    # Devroye below a0 and Geweke-Robert below 0 use naive rejection
    if alg == ALG_INVERSE:
        fill_inverse_k(gen, a, out)
    elif alg == ALG_DEVROYE and a >= a0:
        fill_devroye_k(gen, a, out)
    elif alg == ALG_GEWEKE_ROBERT and a >= 0.0:
        fill_geweke_robert_k(gen, a, out)
    else:
        fill_naive_k(gen, a, math.inf, out)


@njit(cache=True)
def fill_naive_k(gen, a, b, out):
    for m in range(out.shape[0]):
        out[m] = naive_k(gen, a, b)


# --------------------------------------------------------------------------
# Python API


def _cnt(counters) -> np.ndarray:
    if counters is None:
        return C.new()
    return counters.array if isinstance(counters, C.Counters) else counters


def inverse_transform(a: float, u: float) -> float:
    """-Phi_inv(Phi(-a) u) for u in (0, 1]."""
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    x = inverse_transform_u(float(a), float(u))
    if not math.isfinite(x):
        raise OverflowError(f"inverse transform overflows at a={a}")
    return x


def devroye(a: float, stream: RandomStream) -> float:
    if not a > 0.0:
        raise ValueError("devroye needs a > 0")
    return devroye_k(stream.gen, float(a), math.inf)


def geweke_robert(a: float, stream: RandomStream) -> float:
    if a < 0.0:
        return naive(a, math.inf, stream)
    return geweke_robert_k(stream.gen, float(a))


def naive(a: float, b: float, stream: RandomStream) -> float:
    mass = Phi(-a) - Phi(-b) if a > 0.0 else Phi(b) - Phi(a)
    if mass < NAIVE_MASS_GUARD:
        raise ValueError(f"interval [{a}, {b}] too light for naive rejection")
    return naive_k(stream.gen, float(a), float(b))


def trunc_exp(a: float, b: float, rate: float, stream: RandomStream) -> float:
    if not a < b:
        raise ValueError("need a < b")
    if b == math.inf and not rate > 0.0:
        raise ValueError("unbounded interval needs a positive rate")
    return trunc_exp_k(stream.gen, float(a), float(b), float(rate))


def sample_lower(a: float, table, cfg: SamplerConfig, stream: RandomStream,
                 counters=None) -> float:
    return sample_lower_k(stream.gen, float(a), table.packed, _cnt(counters))


def sample_interval(a: float, b: float, table, cfg: SamplerConfig, stream: RandomStream,
                    counters=None) -> float:
    if not a < b:
        raise ValueError("need a < b")
    return sample_interval_k(stream.gen, float(a), float(b), table.packed, cfg.k_min,
                             _cnt(counters))


def sample_general(spec: UnivariateSpec, table, cfg: SamplerConfig, stream: RandomStream,
                   counters=None) -> float:
    return tn_k(stream.gen, spec.mu, spec.sigma, spec.a, spec.b, table.packed, cfg.k_min,
                _cnt(counters))


def draw(algorithm: str, a: float, n: int, stream: RandomStream, table=None,
         cfg: SamplerConfig = SamplerConfig(), b: float = math.inf,
         counters=None) -> np.ndarray:
    """``n`` draws from TN[a, b] with the named algorithm.

    Baselines other than ``table`` only cover ``b = inf``; a finite ``b``
    with a baseline falls back to naive rejection.
    """
    alg = ALGORITHMS[algorithm]
    out = np.empty(int(n))
    a, b = float(a), float(b)
    if alg == ALG_TABLE:
        if table is None:
            raise ValueError("table sampler needs a RegionTable")
        fill_table(stream.gen, a, b, table.packed, cfg.k_min, _cnt(counters), out)
    elif b < math.inf or alg == ALG_NAIVE:
        naive(a, b, stream)  # mass guard
        fill_naive_k(stream.gen, a, b, out)
    else:
        if alg == ALG_INVERSE and a > 37.5:
            raise OverflowError("inverse transform overflows above a = 37.5")
        fill_baseline(stream.gen, alg, a, cfg.a0, out)
    return out
