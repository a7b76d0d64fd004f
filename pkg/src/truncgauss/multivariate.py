"""Chained samplers for N_d(0, Sigma) restricted to x_i >= a_i, d >= 3.

Coordinates are sorted so that a_1 >= ... >= a_d.  Both chains draw the
first two coordinates with the bivariate semi-finite sampler and then add one
coordinate per stage; any stage rejection restarts from the head.

Plus chain: stage k draws X_k from its unconstrained conditional given
x_1..x_{k-1} (precision of the leading k-block of Sigma) and keeps it if
x_k >= a_k.  Each stage accepts with probability >= 1/2 when that
precision's column k is non-positive off the diagonal and
sum_{i<k} q_ik a_i + q_kk a_k <= 0.

Minus chain: integrating x_k out leaves phi-times-Phi(-s(x)); bounding the
Phi factor by c * phi(s) turns the level-(k-1) proposal into a Gaussian with
precision Q_{<k} (the leading block of the full precision) and a shifted
mean.  The proposal is accepted with probability psi(s) / c(-s(a)), then
x_k is drawn from its conditional restricted to [a_k, inf).  Conditions:
column k non-negative off the diagonal and s(a) >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import counters as C
from . import semifinite as SF
from .rng import RandomStream
from .special import c_fun
from .tables import RegionTable, default_table
from .univariate import tn_k

MODE_PLUS = 0
MODE_MINUS = 1

_SYM_TOL = 1e-12
_INV_TOL = 1e-10


class ChainError(ValueError):
    """A chain was requested for a problem that violates its conditions."""


@dataclass(frozen=True)
class MultivariateProblem:
    """Unit-diagonal covariance and lower bounds, stored in sorted order."""

    sigma: np.ndarray
    a: np.ndarray
    order: np.ndarray = field(repr=False)

    @classmethod
    def make(cls, sigma, a) -> "MultivariateProblem":
        sigma = np.array(sigma, dtype=float)
        a = np.array(a, dtype=float)
        d = a.shape[0]
        if d < 3 or sigma.shape != (d, d):
            raise ValueError("need d >= 3 and a d x d covariance")
        if not np.all(np.isfinite(sigma)) or not np.all(np.isfinite(a)):
            raise ValueError("covariance and bounds must be finite")
        if np.max(np.abs(sigma - sigma.T)) > _SYM_TOL:
            raise ValueError("covariance must be symmetric")
        if np.max(np.abs(np.diag(sigma) - 1.0)) > _SYM_TOL:
            raise ValueError("covariance must have unit diagonal")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        order = np.argsort(-a, kind="stable")
        return cls(sigma[np.ix_(order, order)], a[order], order)

    @property
    def d(self) -> int:
        return int(self.a.shape[0])

    @property
    def Q(self) -> np.ndarray:
        q = np.linalg.inv(self.sigma)
        if np.max(np.abs(q @ self.sigma - np.eye(self.d))) > _INV_TOL:
            raise ValueError("covariance is too ill-conditioned to invert")
        return q

    def to_original(self, x_sorted: np.ndarray) -> np.ndarray:
        out = np.empty_like(x_sorted)
        out[..., self.order] = x_sorted
        return out


# --------------------------------------------------------------------------
# chain conditions


def _plus_levels(p: MultivariateProblem):
    """Precision of the leading k-block of Sigma, k = 3..d (1-based)."""
    return {k: np.linalg.inv(p.sigma[:k, :k]) for k in range(3, p.d + 1)}


def _minus_levels(p: MultivariateProblem):
    """(precision, mean) of each level problem of the minus chain, k = 2..d."""
    Q = p.Q
    a = p.a
    levels = {}
    mu = np.zeros(p.d)
    for k in range(p.d, 1, -1):
        Qk = Q[:k, :k]
        levels[k] = (Qk, mu.copy())
        if k == 2:
            break
        q = Qk[: k - 1, k - 1]
        shift = np.linalg.solve(Qk[: k - 1, : k - 1], q) * (a[k - 1] - mu[k - 1])
        mu = mu[: k - 1] - shift
    return levels


def splus_condition(Qk: np.ndarray, a: np.ndarray) -> tuple[bool, str]:
    """Plus-chain check for the last coordinate of a level with precision Qk."""
    k = Qk.shape[0]
    col = Qk[: k - 1, k - 1]
    if np.any(col > 0.0):
        return False, "positive off-diagonal precision entry"
    if col @ a[: k - 1] + Qk[k - 1, k - 1] * a[k - 1] > 0.0:
        return False, "linear bound condition"
    return True, ""


def sminus_condition(Qk: np.ndarray, a: np.ndarray, mu: np.ndarray | None = None) -> tuple[bool, str]:
    """Minus-chain check for the last coordinate of a level (precision Qk, mean mu)."""
    k = Qk.shape[0]
    mu = np.zeros(k) if mu is None else mu[:k]
    col = Qk[: k - 1, k - 1]
    if np.any(col < 0.0):
        return False, "negative off-diagonal precision entry"
    if col @ (a[: k - 1] - mu[: k - 1]) + Qk[k - 1, k - 1] * (a[k - 1] - mu[k - 1]) < 0.0:
        return False, "linear bound condition"
    return True, ""


def check_chain_splus(p: MultivariateProblem, k: int) -> bool:
    if not 3 <= k <= p.d:
        raise ValueError("k must lie in 3..d")
    return splus_condition(np.linalg.inv(p.sigma[:k, :k]), p.a[:k])[0]


def check_chain_sminus(p: MultivariateProblem, k: int) -> bool:
    if not 3 <= k <= p.d:
        raise ValueError("k must lie in 3..d")
    Qk, mu = _minus_levels(p)[k]
    return sminus_condition(Qk, p.a[:k], mu)[0]


@dataclass(frozen=True)
class NotApplicable:
    """Neither chain applies; ``failures`` maps chain name to (k, reason)."""

    failures: dict

    def __bool__(self) -> bool:
        return False


def first_failure(p: MultivariateProblem, chain: str) -> tuple[int, str] | None:
    if chain == "plus":
        for k, Qk in _plus_levels(p).items():
            ok, why = splus_condition(Qk, p.a[:k])
            if not ok:
                return k, why
        return None
    levels = _minus_levels(p)
    for k in range(3, p.d + 1):
        Qk, mu = levels[k]
        ok, why = sminus_condition(Qk, p.a[:k], mu)
        if not ok:
            return k, why
    return None


# --------------------------------------------------------------------------
# kernel


@dataclass(frozen=True)
class _Plan:
    mode: int
    head: np.ndarray        # bivariate parameter block (standardised, canonical)
    head_swap: bool
    head_mu: np.ndarray     # (2,)
    head_sd: np.ndarray     # (2,)
    qcol: np.ndarray        # (d, d): row k holds q_ik of level k, i < k
    qkk: np.ndarray         # (d,)
    mu: np.ndarray          # (d, d): row k holds the level-k mean
    logc: np.ndarray        # (d,)
    a: np.ndarray


def _plan(p: MultivariateProblem, mode: int) -> _Plan:
    d = p.d
    qcol = np.zeros((d, d))
    qkk = np.ones(d)
    mu = np.zeros((d, d))
    logc = np.zeros(d)
    if mode == MODE_PLUS:
        for k, Qk in _plus_levels(p).items():
            qcol[k - 1, : k - 1] = Qk[: k - 1, k - 1]
            qkk[k - 1] = Qk[k - 1, k - 1]
        head_mu = np.zeros(2)
        head_cov = p.sigma[:2, :2]
    else:
        levels = _minus_levels(p)
        for k in range(3, d + 1):
            Qk, m = levels[k]
            qcol[k - 1, : k - 1] = Qk[: k - 1, k - 1]
            qkk[k - 1] = Qk[k - 1, k - 1]
            mu[k - 1, :k] = m[:k]
            s_a = (Qk[: k - 1, k - 1] @ (p.a[: k - 1] - m[: k - 1])
                   + Qk[k - 1, k - 1] * (p.a[k - 1] - m[k - 1])) / math.sqrt(Qk[k - 1, k - 1])
            logc[k - 1] = math.log(c_fun(min(-s_a, 0.0)))
        Q2, m2 = levels[2]
        head_mu = m2[:2].copy()
        head_cov = np.linalg.inv(Q2)
    sd = np.sqrt(np.diag(head_cov))
    r = head_cov[0, 1] / (sd[0] * sd[1])
    bounds = (p.a[:2] - head_mu) / sd
    hp = SF.SemiFiniteProblem.make(r, bounds[0], bounds[1])
    return _Plan(mode, hp.params(), hp.swapped, head_mu, sd, qcol, qkk, mu, logc, p.a.copy())


@njit(cache=True)
def chain_k(gen, mode, head, head_swap, head_mu, head_sd, qcol, qkk, mu, logc, a, tab, cnt, x):
    """Fill x with one accepted vector (sorted coordinates)."""
    d = a.shape[0]
    while True:
        cnt[C.MV_ATTEMPTS] += 1
        ok, y1, y2, _ = SF.propose_k(gen, head, tab, cnt, False)
        if not ok:
            continue
        if head_swap:
            y1, y2 = y2, y1
        x[0] = head_mu[0] + head_sd[0] * y1
        x[1] = head_mu[1] + head_sd[1] * y2
        good = True
        for k in range(2, d):
            lin = 0.0
            for i in range(k):
                lin += qcol[k, i] * (x[i] - mu[k, i])
            sd = 1.0 / math.sqrt(qkk[k])
            if mode == MODE_PLUS:
                xk = -lin / qkk[k] + sd * gen.standard_normal()
                if xk < a[k]:
                    good = False
                    break
            else:
                s = (lin + qkk[k] * (a[k] - mu[k, k])) * sd
                if not SF._accept_ratio(gen, -s, logc[k], tab, cnt):
                    good = False
                    break
                xk = tn_k(gen, mu[k, k] - lin / qkk[k], sd, a[k], math.inf, tab, SF.K_MIN, cnt)
            x[k] = xk
        if good:
            cnt[C.MV_ACCEPTS] += 1
            return


@njit(cache=True)
def chain_fill_k(gen, mode, head, head_swap, head_mu, head_sd, qcol, qkk, mu, logc, a, tab, cnt, out):
    for m in range(out.shape[0]):
        chain_k(gen, mode, head, head_swap, head_mu, head_sd, qcol, qkk, mu, logc, a, tab, cnt, out[m])


# --------------------------------------------------------------------------
# Python API


def _resolve(stream, table, counters):
    if stream is None:
        stream = RandomStream(0)
    if table is None:
        table = default_table()
    cnt = counters.array if counters is not None else C.new()
    return stream, table, cnt


def _run(p: MultivariateProblem, mode: int, n: int, stream, table, counters) -> np.ndarray:
    stream, table, cnt = _resolve(stream, table, counters)
    pl = _plan(p, mode)
    out = np.empty((int(n), p.d))
    chain_fill_k(stream.gen, pl.mode, pl.head, pl.head_swap, pl.head_mu, pl.head_sd,
                 pl.qcol, pl.qkk, pl.mu, pl.logc, pl.a, table.packed, cnt, out)
    return p.to_original(out)


def sample_chain_splus(p: MultivariateProblem, n: int = 1, stream: RandomStream | None = None,
                       table: RegionTable | None = None,
                       counters: C.Counters | None = None) -> np.ndarray:
    """``n`` draws (rows, original coordinate order) from the plus chain."""
    fail = first_failure(p, "plus")
    if fail is not None:
        raise ChainError(f"plus chain condition fails at k={fail[0]}: {fail[1]}")
    return _run(p, MODE_PLUS, n, stream, table, counters)


def sample_chain_sminus(p: MultivariateProblem, n: int = 1, stream: RandomStream | None = None,
                        table: RegionTable | None = None,
                        counters: C.Counters | None = None) -> np.ndarray:
    fail = first_failure(p, "minus")
    if fail is not None:
        raise ChainError(f"minus chain condition fails at k={fail[0]}: {fail[1]}")
    return _run(p, MODE_MINUS, n, stream, table, counters)


def try_sample(p: MultivariateProblem, n: int = 1, stream: RandomStream | None = None,
               table: RegionTable | None = None, counters: C.Counters | None = None):
    """Plus chain if it applies, else minus chain, else :class:`NotApplicable`."""
    plus = first_failure(p, "plus")
    if plus is None:
        return _run(p, MODE_PLUS, n, stream, table, counters)
    minus = first_failure(p, "minus")
    if minus is None:
        return _run(p, MODE_MINUS, n, stream, table, counters)
    return NotApplicable({"plus": plus, "minus": minus})
