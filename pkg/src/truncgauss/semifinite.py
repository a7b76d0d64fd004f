"""Bivariate standard normal with correlation rho restricted to x1 >= a1, x2 >= a2.

The marginal of X1 is proportional to phi(x1) * Phi((rho*x1 - a2)/nu) on
[a1, inf), nu^2 = 1 - rho^2.  Each case bounds the Phi factor differently:

* ``SPLUS``: Phi <= 1.  X1 from TN[a1, inf), X2 from N(rho*x1, nu^2), keep
  the pair if x2 >= a2.
* ``SMINUS``: the argument stays below z0 = (rho*a1 - a2)/nu <= 0, where
  Phi(z) <= c(z0) phi(z).  The proposal is TN[a1, inf)(rho*a2, nu^2).
* ``MMINUS``: the argument changes sign at a2/rho.  Mixture of the SPLUS
  shortcut on [a1, a2/rho] and the SMINUS bound (with c = sqrt(pi/2)) above.
* ``MPLUS``: same split, but the left piece uses the tilted bound
  Phi(z) <= d(z0) phi(z) exp(0.68 z), whose proposal is N(theta, nu^2)
  restricted to [a1, a2/rho] with theta = rho*(a2 + 0.68*nu).

Problems are canonicalised to a1 >= a2; :func:`sample` swaps back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numba import njit

from . import counters as C
from .rng import RandomStream
from .special import (
    INV_SQRT_2PI,
    LOG_SQRT_2PI,
    PHI_INV_THIRD,
    SQRT_PI_2,
    TILT,
    Phi,
    c_fun,
    lazy_compare,
    log_d_fun,
    log_Phi,
    log_Phi_diff,
    psi,
)
from .tables import RegionTable, default_table
from .univariate import tn_k

#: |rho| at or above this is treated as perfectly correlated and refused
RHO_LIMIT = 1.0 - 1e-12

#: below this argument the Phi/phi ratio is compared directly
Z_LAZY = -30.0

K_MIN = 5


class CaseLabel(IntEnum):
    SPlus = 0
    SMinus = 1
    MPlus = 2
    MMinus = 3


CASE_SPLUS = 0
CASE_SMINUS = 1
CASE_MPLUS = 2
CASE_MMINUS = 3
CASE_INDEP = 4

# parameter block layout
P_RHO = 0
P_A1 = 1
P_A2 = 2
P_NU = 3
P_CASE = 4
P_W1 = 5      # probability of the untilted component
P_LOGK = 6    # log of the envelope constant (c, sqrt(pi/2) or d)
P_SPLIT = 7   # a2/rho, where the Phi argument changes sign
P_MEAN = 8    # mean of the Gaussian-product proposal
P_Z0 = 9
P_LEN = 10


@njit(cache=True)
def classify_k(rho, a1, a2):
    """Case code for a canonical problem (a1 >= a2); ties go to the S cases."""
    if rho >= 0.0:
        return CASE_SPLUS if rho * a1 - a2 >= 0.0 else CASE_MPLUS
    if a1 <= PHI_INV_THIRD:
        return CASE_SPLUS
    return CASE_SMINUS if rho * a1 - a2 <= 0.0 else CASE_MMINUS


@njit(cache=True)
def _mix_prob(log_w1, log_w2):
    if log_w1 == -math.inf:
        return 0.0
    if log_w2 == -math.inf:
        return 1.0
    return 1.0 / (1.0 + math.exp(log_w2 - log_w1))


@njit(cache=True)
def setup_k(rho, a1, a2):
    """Parameter block for a canonical problem."""
    prm = np.zeros(P_LEN)
    nu = math.sqrt((1.0 - rho) * (1.0 + rho))
    prm[P_RHO] = rho
    prm[P_A1] = a1
    prm[P_A2] = a2
    prm[P_NU] = nu
    z0 = (rho * a1 - a2) / nu
    prm[P_Z0] = z0
    if rho == 0.0:
        prm[P_CASE] = CASE_INDEP
        return prm
    case = classify_k(rho, a1, a2)
    prm[P_CASE] = case
    split = a2 / rho
    prm[P_SPLIT] = split
    if case == CASE_SMINUS:
        prm[P_MEAN] = rho * a2
        prm[P_LOGK] = math.log(c_fun(z0))
    elif case == CASE_MMINUS:
        prm[P_MEAN] = rho * a2
        prm[P_LOGK] = math.log(SQRT_PI_2)
        log_w1 = log_Phi_diff(a1, split)
        log_w2 = math.log(0.5 * nu) - 0.5 * a2 * a2 + log_Phi(-a2 * nu / rho)
        prm[P_W1] = _mix_prob(log_w1, log_w2)
    elif case == CASE_MPLUS:
        theta = rho * (a2 + TILT * nu)
        prm[P_MEAN] = theta
        log_d = log_d_fun(z0)
        prm[P_LOGK] = log_d
        log_w1 = log_Phi(-split) if math.isfinite(split) else -math.inf
        # (theta^2 - a2^2 - 2*tilt*nu*a2) / (2 nu^2), simplified to avoid cancellation
        expo = -0.5 * a2 * a2 - TILT * nu * a2 + 0.5 * (rho * TILT) ** 2
        log_w2 = (math.log(nu) - LOG_SQRT_2PI
                  + log_Phi_diff((a1 - theta) / nu, (split - theta) / nu)
                  + expo + log_d)
        prm[P_W1] = _mix_prob(log_w1, log_w2)
    return prm


@njit(cache=True)
def _accept_ratio(gen, z, log_k, tab, cnt):
    """Accept with probability psi(-z) / exp(log_k), i.e. Phi(z) >= U K phi(z)."""
    u = gen.random()
    if z >= Z_LAZY:
        t = u * math.exp(log_k - 0.5 * z * z) * INV_SQRT_2PI
        return (lazy_compare(z, t, tab, True, cnt) & 1) == 1
    cnt[C.PHI_EXACT] += 1
    return math.log1p(-u) + log_k <= math.log(psi(-z))


@njit(cache=True)
def _ratio_prob(z, log_k):
    return math.exp(math.log(psi(-z)) - log_k)


@njit(cache=True)
def propose_k(gen, prm, tab, cnt, want_prob):
    """One proposal.  Returns (accepted, x1, x2, acceptance probability).

    The probability is only evaluated when ``want_prob`` is set (NaN
    otherwise); the accept decision never depends on it.
    """
    rho = prm[P_RHO]
    a1 = prm[P_A1]
    a2 = prm[P_A2]
    nu = prm[P_NU]
    case = int(prm[P_CASE])
    cnt[C.BIV_PROPOSALS] += 1
    prob = math.nan
    if case == CASE_INDEP:
        x1 = tn_k(gen, 0.0, 1.0, a1, math.inf, tab, K_MIN, cnt)
        x2 = tn_k(gen, 0.0, 1.0, a2, math.inf, tab, K_MIN, cnt)
        cnt[C.BIV_ACCEPTS] += 1
        return True, x1, x2, 1.0
    tilted = False
    if case == CASE_SPLUS:
        lo, hi, plain = a1, math.inf, True
        cnt[C.COMP_1] += 1
    elif case == CASE_SMINUS:
        lo, hi, plain = a1, math.inf, False
        cnt[C.COMP_2] += 1
    else:
        split = prm[P_SPLIT]
        first = gen.random() < prm[P_W1]
        if case == CASE_MMINUS:
            if first:
                lo, hi, plain = a1, split, True
            else:
                lo, hi, plain = split, math.inf, False
        else:
            if first:
                lo, hi, plain = split, math.inf, True
            else:
                lo, hi, plain, tilted = a1, split, False, True
        if first:
            cnt[C.COMP_1] += 1
        else:
            cnt[C.COMP_2] += 1
    if plain:
        x1 = tn_k(gen, 0.0, 1.0, lo, hi, tab, K_MIN, cnt)
        x2 = rho * x1 + nu * gen.standard_normal()
        if want_prob:
            prob = Phi((rho * x1 - a2) / nu)
        if x2 >= a2:
            cnt[C.BIV_ACCEPTS] += 1
            return True, x1, x2, prob
        return False, x1, x2, prob
    x1 = tn_k(gen, prm[P_MEAN], nu, lo, hi, tab, K_MIN, cnt)
    z = (rho * x1 - a2) / nu
    log_k = prm[P_LOGK]
    if tilted:
        log_k += TILT * z
    if want_prob:
        prob = _ratio_prob(z, log_k)
        if prob > 1.0 + 1e-9:
            raise ValueError("acceptance probability above one")
    if not _accept_ratio(gen, z, log_k, tab, cnt):
        return False, x1, math.nan, prob
    x2 = tn_k(gen, rho * x1, nu, a2, math.inf, tab, K_MIN, cnt)
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
    """Run a fixed number of proposals; returns (accepted, summed probability)."""
    acc = 0
    psum = 0.0
    for _ in range(n_prop):
        ok, _x1, _x2, p = propose_k(gen, prm, tab, cnt, True)
        acc += ok
        psum += p
    return acc, psum


@njit(cache=True)
def log_target_k(prm, x1):
    """log of phi(x1) Phi((rho x1 - a2)/nu); -inf below a1."""
    if x1 < prm[P_A1]:
        return -math.inf
    z = (prm[P_RHO] * x1 - prm[P_A2]) / prm[P_NU]
    return -0.5 * x1 * x1 - LOG_SQRT_2PI + log_Phi(z)


@njit(cache=True)
def log_envelope_k(prm, x1):
    """log of the unnormalised proposal density the case uses, at x1 >= a1."""
    rho = prm[P_RHO]
    a2 = prm[P_A2]
    nu = prm[P_NU]
    case = int(prm[P_CASE])
    z = (rho * x1 - a2) / nu
    base = -0.5 * x1 * x1 - LOG_SQRT_2PI
    prod = base - 0.5 * z * z - LOG_SQRT_2PI
    if case == CASE_SPLUS or case == CASE_INDEP:
        return base
    if case == CASE_SMINUS:
        return prod + prm[P_LOGK]
    if case == CASE_MMINUS:
        return base if x1 < prm[P_SPLIT] else prod + prm[P_LOGK]
    return base if x1 >= prm[P_SPLIT] else prod + prm[P_LOGK] + TILT * z


# --------------------------------------------------------------------------
# Python API


@dataclass(frozen=True)
class SemiFiniteProblem:
    rho: float
    a1: float
    a2: float
    swapped: bool = False

    def __post_init__(self):
        if not math.isfinite(self.rho) or abs(self.rho) >= RHO_LIMIT:
            raise ValueError(f"rho must satisfy |rho| < {RHO_LIMIT!r}")
        if not (math.isfinite(self.a1) and math.isfinite(self.a2)):
            raise ValueError("a1 and a2 must be finite")
        if self.a1 < self.a2:
            raise ValueError("canonical problems need a1 >= a2; use SemiFiniteProblem.make")

    @classmethod
    def make(cls, rho: float, a1: float, a2: float) -> "SemiFiniteProblem":
        """Canonicalise arbitrary bounds, recording whether they were swapped."""
        rho, a1, a2 = float(rho), float(a1), float(a2)
        if a1 < a2:
            return cls(rho, a2, a1, True)
        return cls(rho, a1, a2, False)

    @property
    def nu2(self) -> float:
        return (1.0 - self.rho) * (1.0 + self.rho)

    @property
    def case(self) -> CaseLabel:
        return CaseLabel(classify_k(self.rho, self.a1, self.a2))

    def params(self) -> np.ndarray:
        return setup_k(self.rho, self.a1, self.a2)


@dataclass(frozen=True)
class MixtureWeights:
    w1: float
    w2: float
    theta: float

    @property
    def p1(self) -> float:
        return self.w1 / (self.w1 + self.w2)


def classify(p: SemiFiniteProblem) -> CaseLabel:
    return p.case


def mixture_weights(p: SemiFiniteProblem) -> MixtureWeights:
    """Unnormalised component weights (M cases); w2 = 0 for the S cases."""
    rho, a1, a2, nu = p.rho, p.a1, p.a2, math.sqrt(p.nu2)
    case = p.case
    if case == CaseLabel.MMinus:
        w1 = Phi(a2 / rho) - Phi(a1)
        w2 = 0.5 * nu * math.exp(-0.5 * a2 * a2) * Phi(-a2 * nu / rho)
        return MixtureWeights(w1, w2, math.nan)
    if case == CaseLabel.MPlus and rho > 0.0:
        theta = rho * (a2 + TILT * nu)
        w1 = Phi(-a2 / rho)
        z0 = (rho * a1 - a2) / nu
        w2 = (nu * INV_SQRT_2PI
              * (Phi((a2 / rho - theta) / nu) - Phi((a1 - theta) / nu))
              * math.exp((theta * theta - a2 * a2 - 2.0 * TILT * nu * a2) / (2.0 * nu * nu))
              * math.exp(log_d_fun(z0)))
        return MixtureWeights(w1, w2, theta)
    return MixtureWeights(1.0, 0.0, math.nan)


def _resolve(stream, table, counters):
    if stream is None:
        stream = RandomStream(0)
    if table is None:
        table = default_table()
    cnt = counters.array if counters is not None else C.new()
    return stream, table, cnt


def sample(p: SemiFiniteProblem, stream: RandomStream | None = None,
           table: RegionTable | None = None, counters: C.Counters | None = None,
           ) -> tuple[float, float, int]:
    """One exact draw in the caller's original component order.

    Returns ``(x1, x2, proposals)``.
    """
    stream, table, cnt = _resolve(stream, table, counters)
    before = cnt[C.BIV_PROPOSALS]
    x1, x2 = sample_k(stream.gen, p.params(), table.packed, cnt)
    used = int(cnt[C.BIV_PROPOSALS] - before)
    if p.swapped:
        x1, x2 = x2, x1
    return float(x1), float(x2), used


def sample_many(p: SemiFiniteProblem, n: int, stream: RandomStream | None = None,
                table: RegionTable | None = None,
                counters: C.Counters | None = None) -> np.ndarray:
    """``n`` draws as an (n, 2) array in the caller's component order."""
    stream, table, cnt = _resolve(stream, table, counters)
    out = np.empty((int(n), 2))
    fill_k(stream.gen, p.params(), table.packed, cnt, out)
    if p.swapped:
        out = out[:, ::-1].copy()
    return out


def _require(p: SemiFiniteProblem, label: CaseLabel) -> None:
    if p.rho == 0.0 or p.case != label:
        raise ValueError(f"problem is not in case {label.name}")


def sample_splus(p, stream=None, table=None, counters=None):
    _require(p, CaseLabel.SPlus)
    return sample(p, stream, table, counters)[:2]


def sample_sminus(p, stream=None, table=None, counters=None):
    _require(p, CaseLabel.SMinus)
    return sample(p, stream, table, counters)[:2]


def sample_mminus(p, stream=None, table=None, counters=None):
    _require(p, CaseLabel.MMinus)
    return sample(p, stream, table, counters)[:2]


def sample_mplus(p, stream=None, table=None, counters=None):
    _require(p, CaseLabel.MPlus)
    return sample(p, stream, table, counters)[:2]


def empirical_acceptance(p: SemiFiniteProblem, n_prop: int,
                         stream: RandomStream | None = None,
                         table: RegionTable | None = None,
                         counters: C.Counters | None = None) -> tuple[float, float]:
    """(accepted fraction, mean acceptance probability) over ``n_prop`` proposals."""
    stream, table, cnt = _resolve(stream, table, counters)
    acc, psum = acceptance_run_k(stream.gen, p.params(), int(n_prop), table.packed, cnt)
    return acc / n_prop, psum / n_prop
