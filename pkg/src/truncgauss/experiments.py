"""Desk-scale replications: acceptance histograms and the timing benchmark.

Every problem gets its own child stream spawned from the master seed, and
results are stored by problem index, so output depends only on
(seed, table, flags).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import counters as C
from . import finite as F
from . import semifinite as SF
from . import univariate as U
from .rng import RandomStream
from .tables import RegionTable, default_table

HIST_COLUMNS = ("index", "rho", "a1", "b1", "a2", "b2", "case", "mean_prob", "accepted_fraction")


@dataclass(frozen=True)
class HistogramResult:
    experiment: str
    rows: list
    n_props: int

    @property
    def rates(self) -> np.ndarray:
        return np.array([r[7] for r in self.rows])

    @property
    def accepted(self) -> np.ndarray:
        return np.array([r[8] for r in self.rows])

    def summary(self) -> dict:
        r = self.rates
        return {
            "experiment": self.experiment,
            "n_problems": len(r),
            "n_props": self.n_props,
            "min": float(r.min()),
            "q01": float(np.quantile(r, 0.01)),
            "q10": float(np.quantile(r, 0.10)),
            "median": float(np.median(r)),
            "min_accepted_fraction": float(self.accepted.min()),
        }


def draw_fig3_params(stream: RandomStream, n: int, s: float = 1.0) -> np.ndarray:
    """rho ~ U[-1, 1], a1, a2 ~ N(0, s^2) conditioned on a1 >= a2."""
    g = stream.gen
    rho = g.uniform(-1.0, 1.0, n)
    a = g.normal(0.0, s, (n, 2))
    a.sort(axis=1)
    return np.column_stack([rho, a[:, 1], a[:, 0]])


def draw_fig4_params(stream: RandomStream, n: int, s: float = 2.0) -> np.ndarray:
    """rho ~ U[-1, 1], a_i ~ N(0, s^2), b_i = a_i + 2 Exp(1)."""
    g = stream.gen
    rho = g.uniform(-1.0, 1.0, n)
    a = g.normal(0.0, s, (n, 2))
    b = a + 2.0 * g.standard_exponential((n, 2))
    return np.column_stack([rho, a[:, 0], b[:, 0], a[:, 1], b[:, 1]])


def histogram(experiment: str, n_problems: int = 10_000, n_props: int = 1000, seed: int = 0,
              table: RegionTable | None = None) -> HistogramResult:
    """Per-problem acceptance over ``n_props`` proposals for fig3 or fig4."""
    table = default_table() if table is None else table
    master = RandomStream(seed)
    kids = master.spawn(n_problems + 1)
    cnt = C.new()
    rows = []
    if experiment == "fig3":
        params = draw_fig3_params(kids[0], n_problems)
        for i, (rho, a1, a2) in enumerate(params):
            p = SF.SemiFiniteProblem.make(rho, a1, a2)
            acc, psum = SF.acceptance_run_k(kids[i + 1].gen, p.params(), n_props, table.packed, cnt)
            case = "Indep" if p.rho == 0.0 else p.case.name
            rows.append((i, rho, a1, math.inf, a2, math.inf, case, psum / n_props, acc / n_props))
    elif experiment == "fig4":
        params = draw_fig4_params(kids[0], n_problems)
        for i, (rho, a1, b1, a2, b2) in enumerate(params):
            p = F.canonicalize(rho, a1, b1, a2, b2)
            prm = p.params(F.DELTA, F.DEFAULT_LEFT_RULE)
            acc, psum = F.acceptance_run_k(kids[i + 1].gen, prm, n_props, table.packed, cnt)
            case = F.FiniteCase(int(prm[F.F_CASE])).name
            rows.append((i, rho, a1, b1, a2, b2, case, psum / n_props, acc / n_props))
    else:
        raise ValueError(f"unknown experiment {experiment!r}")
    return HistogramResult(experiment, rows, n_props)


# --------------------------------------------------------------------------
# benchmark

BENCH_COLUMNS = ("a", "algorithm", "n", "seconds", "draws_per_second",
                 "table_acceptance", "fast_fraction")
BENCH_ALGORITHMS = ("table", "devroye", "geweke-robert", "inverse")


def _time_once(alg: str, a: float, n: int, stream: RandomStream, table, counters) -> float:
    t0 = time.perf_counter()
    U.draw(alg, a, n, stream, table, counters=counters)
    return time.perf_counter() - t0


def bench(a_grid, algorithms=BENCH_ALGORITHMS, n: int = 10_000_000, repeats: int = 3,
          seed: int = 0, table: RegionTable | None = None) -> list[tuple]:
    """Best-of-``repeats`` wall time per (a, algorithm).

    Algorithms are interleaved within each repeat so slow drifts of the
    machine hit all of them alike.  Devroye is skipped for a <= 0.
    """
    table = default_table() if table is None else table
    # compile every kernel before timing
    warm = RandomStream(seed)
    for alg in algorithms:
        U.draw(alg, 1.0, 16, warm, table)
        U.draw(alg, -1.0 if alg != "devroye" else 0.5, 16, warm, table)
    rows = []
    for j, a in enumerate(a_grid):
        a = float(a)
        algs = [g for g in algorithms if not (g == "devroye" and a <= 0.0)]
        best = {g: math.inf for g in algs}
        stats = {}
        for r in range(repeats):
            for g in algs:
                cnt = C.Counters()
                s = RandomStream(seed + 7919 * j + r)
                best[g] = min(best[g], _time_once(g, a, n, s, table, cnt))
                stats[g] = cnt
        for g in algs:
            cnt = stats[g]
            tacc = cnt.table_acceptance if g == "table" else math.nan
            ffr = cnt.fast_fraction if g == "table" else math.nan
            rows.append((a, g, n, best[g], n / best[g], tacc, ffr))
    return rows
