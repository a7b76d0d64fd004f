"""Validation checks comparing the samplers with the scipy oracle.

Each check returns :class:`Check` records, which the ``validate`` CLI
subcommand serialises and ``tests/test_acceptance.py`` asserts on.  The
``scale`` argument multiplies every sample count (1.0 is the full run);
thresholds never depend on it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from . import counters as C
from . import experiments as E
from . import finite as F
from . import multivariate as M
from . import oracle as O
from . import semifinite as SF
from . import univariate as U
from .rng import RandomStream
from .special import X_D
from .tables import RegionTable, default_table

SUITES = ("univariate", "bivariate", "multivariate", "bounds", "speed")

KS_POINTS = (-2.0, -1.0, 0.0, 0.65, 1.0, 2.0, 3.0, 5.0, 9.5)
KS_INTERVALS = ((-2.0, -1.99), (0.0, 0.01), (1.0, 1.01), (3.0, 3.01), (9.5, 9.51),
                (-1.0, 1.0), (0.5, 3.0), (2.0, 6.0), (-3.0, 0.2), (-0.3, 0.0))
#: log-space slack for the domination check (rounding of two independent codes)
DOMINATION_TOL = 1e-9


@dataclass
class Check:
    criterion: int
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    hard: bool = True
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("value", "threshold"):
            if d[k] is not None and not math.isfinite(d[k]):
                d[k] = repr(d[k])
        return d

    def line(self) -> str:
        tag = "PASS" if self.passed else ("FAIL" if self.hard else "SOFT-FAIL")
        val = "" if self.value is None else f" value={self.value:.6g}"
        thr = "" if self.threshold is None else f" threshold={self.threshold:.6g}"
        return f"[{tag}] criterion {self.criterion}: {self.name}{val}{thr}"


def _n(base: int, scale: float, floor: int = 100) -> int:
    return max(floor, int(round(base * scale)))


def _tn_cdf(a: float, b: float):
    return lambda x: O.exact_cdf_tn(a, b, x)


# --------------------------------------------------------------------------
# univariate


def ks_univariate(table: RegionTable, scale: float = 1.0, seed: int = 1) -> list[Check]:
    """KS distance of each algorithm against the exact truncated-normal CDF."""
    n = _n(10**6, scale)
    crit = O.KS_CRIT_01 / math.sqrt(n)
    out = []
    for alg in ("table", "devroye", "geweke-robert", "inverse", "naive"):
        for a in KS_POINTS:
            if alg == "devroye" and a <= 0.0:
                continue
            if alg == "naive" and a > 3.0:
                continue
            x = U.draw(alg, a, n, RandomStream(seed), table)
            ks = O.ks_statistic(x, _tn_cdf(a, math.inf))
            ok = ks < crit and bool(np.all(np.isfinite(x))) and bool(np.all(x >= a))
            out.append(Check(1, f"ks {alg} a={a}", ok, ks, crit))
    for a, b in KS_INTERVALS:
        x = U.draw("table", a, n, RandomStream(seed), table, b=b)
        ks = O.ks_statistic(x, _tn_cdf(a, b))
        ok = ks < crit and bool(np.all((x >= a) & (x <= b)))
        out.append(Check(1, f"ks table [{a}, {b}]", ok, ks, crit))
    return out


def fast_path_acceptance(table: RegionTable, scale: float = 1.0, seed: int = 7) -> list[Check]:
    """Proposal acceptance of the table sampler over a 200-point grid."""
    n = _n(10**5, scale)
    grid = np.linspace(table.a_min, table.a_max, 200)
    acc = np.empty(grid.size)
    for i, a in enumerate(grid):
        cnt = C.Counters()
        U.draw("table", a, n, RandomStream(seed), table, counters=cnt)
        acc[i] = cnt.table_acceptance
    sig = math.sqrt(0.95 * 0.05 / n)
    thr_min = 0.95 - 3.0 * sig
    thr_med = 0.99 - 3.0 * math.sqrt(0.99 * 0.01 / n)
    bad = grid[acc < thr_min]
    worst = int(np.argmin(acc))
    return [
        Check(2, "table acceptance >= 0.95 at every grid point", bool(bad.size == 0),
              float(acc.min()), thr_min,
              detail={"at": float(grid[worst]), "failing_points": int(bad.size),
                      "first_failing_a": float(bad.min()) if bad.size else None}),
        Check(2, "table acceptance median >= 0.99", bool(np.median(acc) >= thr_med),
              float(np.median(acc)), thr_med),
    ]


def table_memory(table: RegionTable) -> list[Check]:
    return [Check(3, "stored table bytes", table.nbytes <= 200_000, float(table.nbytes), 200_000.0,
                  detail={"N": table.N, "N_s": table.n_stored})]


def stability(table: RegionTable, seed: int = 13) -> list[Check]:
    out = []
    s = RandomStream(seed)
    a_inv = np.linspace(0.0, 37.0, 75)
    bad = [float(a) for a in a_inv
           if not np.all(np.isfinite(x := U.draw("inverse", a, 1000, s, table)) & (x >= a))]
    out.append(Check(13, "inverse transform finite for a <= 37", not bad,
                     detail={"failing": bad}))
    a_tab = np.linspace(-5.0, 30.0, 71)
    bad = [float(a) for a in a_tab
           if not np.all(np.isfinite(x := U.draw("table", a, 1000, s, table)) & (x >= a))]
    out.append(Check(13, "table sampler finite for a <= 30", not bad, detail={"failing": bad}))
    return out


# --------------------------------------------------------------------------
# bivariate


def histogram_checks(experiment: str, table: RegionTable, scale: float = 1.0,
                     seed: int = 2024) -> tuple[list[Check], E.HistogramResult]:
    n_prob = _n(10**4, scale, 100)
    res = E.histogram(experiment, n_prob, 1000, seed, table)
    s = res.summary()
    if experiment == "fig3":
        crit, floor, t10, t01 = 5, 0.5, 0.78, 0.63
    else:
        crit, floor, t10, t01 = 6, 0.47, 0.69, 0.53
    thr_min = floor - 3.0 * 0.016
    nan = bool(np.any(np.isnan(res.rates)))
    return [
        Check(crit, f"{experiment} minimum acceptance", s["min"] >= thr_min and not nan,
              s["min"], thr_min, detail=s),
        Check(crit, f"{experiment} 10% quantile", s["q10"] >= t10, s["q10"], t10),
        Check(crit, f"{experiment} 1% quantile", s["q01"] >= t01, s["q01"], t01),
    ], res


@njit(cache=True)
def _semi_env_many(prm, xs, out):
    for i in range(xs.size):
        out[i] = SF.log_envelope_k(prm, xs[i])


@njit(cache=True)
def _finite_env_many(prm, xs, out):
    for i in range(xs.size):
        out[i] = F.log_envelope_k(prm, xs[i])


def _semi_target(prm, xs):
    rho, a2, nu = prm[SF.P_RHO], prm[SF.P_A2], prm[SF.P_NU]
    return O.norm_logpdf(xs) + O.special.log_ndtr((rho * xs - a2) / nu)


def _finite_target(prm, xs):
    rho, a2, b2, nu = prm[F.F_RHO], prm[F.F_A2], prm[F.F_B2], prm[F.F_NU]
    return O.norm_logpdf(xs) + O.log_ndtr_diff((a2 - rho * xs) / nu, (b2 - rho * xs) / nu)


def _semi_points(rng, prm, m):
    a1 = prm[SF.P_A1]
    scale = rng.choice([0.05, 0.5, 2.0, 8.0], m)
    xs = a1 + scale * rng.standard_exponential(m)
    split = prm[SF.P_SPLIT]
    if math.isfinite(split) and split >= a1:
        xs[:4] = (a1, split, np.nextafter(split, -np.inf), np.nextafter(split, np.inf))
    return xs


def _finite_points(rng, prm, m):
    a1, b1 = prm[F.F_A1], prm[F.F_B1]
    xs = rng.uniform(a1, b1, m)
    marks = [a1, b1]
    for k in (F.F_C_LO, F.F_C_HI, F.F_V, F.F_W, F.F_CROSS):
        v = prm[k]
        if a1 < v < b1:
            marks += [v, np.nextafter(v, -np.inf), np.nextafter(v, np.inf)]
    xs[:len(marks)] = marks[:m]
    return xs


def _semi_label(prm) -> str:
    return SF.CaseLabel(int(prm[SF.P_CASE])).name


def _finite_label(prm) -> str:
    case = int(prm[F.F_CASE])
    if case == F.CASE_T:
        return "T"
    names = {F.BOUND_FLAT: "flat", F.BOUND_TILT: "tilt", F.BOUND_SECANT: "secant"}
    return f"M3/{names[int(prm[F.F_L_KIND])]}-{names[int(prm[F.F_R_KIND])]}"


def domination(scale: float = 1.0, seed: int = 99) -> list[Check]:
    """target <= envelope at random (problem, x1) pairs for every case."""
    rng = np.random.default_rng(seed)
    per_problem = 200
    n_target = _n(10**6, scale, 1000)
    evals: dict[str, int] = {}
    worst: dict[str, float] = {}
    viol: dict[str, list] = {}
    total = 0

    def record(label, tgt, env, where):
        nonlocal total
        gap = tgt - env
        bad = ~(gap <= DOMINATION_TOL * (1.0 + np.abs(env)))
        evals[label] = evals.get(label, 0) + tgt.size
        worst[label] = max(worst.get(label, -math.inf), float(np.nanmax(gap)))
        if bad.any():
            viol.setdefault(label, []).append((where, int(bad.sum())))
        total += tgt.size

    buf = np.empty(per_problem)
    semi_quota = n_target // 2
    while total < semi_quota:
        rho = rng.uniform(-0.999, 0.999)
        a = rng.normal(0.0, rng.choice([0.5, 1.5, 4.0]), 2)
        prm = SF.SemiFiniteProblem.make(rho, a[0], a[1]).params()
        if int(prm[SF.P_CASE]) == SF.CASE_INDEP:
            continue
        xs = _semi_points(rng, prm, per_problem)
        _semi_env_many(prm, xs, buf)
        record(_semi_label(prm), _semi_target(prm, xs), buf.copy(), (rho, *a))
    rules = (F.LEFT_MIN_MASS, F.LEFT_LITERAL, F.LEFT_REACH)
    while total < n_target:
        rho = rng.uniform(-0.999, 0.999)
        a = rng.normal(0.0, rng.choice([1.0, 2.0, 4.0]), 2)
        b = a + rng.choice([0.05, 0.5, 2.0, 6.0]) * rng.standard_exponential(2)
        for form in F.canonical_forms(rho, a[0], b[0], a[1], b[1]):
            for rule in rules:
                prm = form.params(F.DELTA, rule)
                if int(prm[F.F_CASE]) == F.CASE_INDEP:
                    continue
                xs = _finite_points(rng, prm, per_problem)
                _finite_env_many(prm, xs, buf)
                record(_finite_label(prm), _finite_target(prm, xs), buf.copy(),
                       (form.rho, form.a1, form.b1, form.a2, form.b2, rule))
                if int(prm[F.F_CASE]) == F.CASE_T:
                    break
    n_viol = sum(c for v in viol.values() for _, c in v)
    required = {"SPlus", "SMinus", "MPlus", "MMinus", "T"}
    kinds = {k for k in evals if k.startswith("M3/")}
    covered = required <= set(evals) and len(kinds) >= 3
    return [Check(9, "envelope domination", n_viol == 0 and covered, float(n_viol), 0.0,
                  detail={"evaluations": total, "per_case": evals, "max_log_gap": worst,
                          "violations": {k: v[:5] for k, v in viol.items()}})]


def _semi_suite(rng, k):
    """k problems per semi-finite case, canonical."""
    want = {lab: [] for lab in SF.CaseLabel}
    while any(len(v) < k for v in want.values()):
        p = SF.SemiFiniteProblem.make(rng.uniform(-0.98, 0.98), *rng.normal(0.0, 1.5, 2))
        if p.rho != 0.0 and len(want[p.case]) < k:
            want[p.case].append(p)
    return [p for v in want.values() for p in v]


def _finite_suite(rng, k):
    """Finite problems covering T and every M3 kind combination seen, k of each."""
    want: dict[str, list] = {}
    tries = 0
    while tries < 20000 and (sum(len(v) for v in want.values()) < 5 * k or len(want) < 4):
        tries += 1
        rho = rng.uniform(-0.98, 0.98)
        a = rng.normal(0.0, 2.0, 2)
        b = a + rng.choice([0.1, 2.0]) * rng.standard_exponential(2)
        p = F.canonicalize(rho, a[0], b[0], a[1], b[1])
        prm = p.params()
        if int(prm[F.F_CASE]) == F.CASE_INDEP:
            continue
        lab = _finite_label(prm)
        if len(want.setdefault(lab, [])) < k:
            want[lab].append(p)
    return [p for v in want.values() for p in v]


def oracle_vs_empirical(table: RegionTable, scale: float = 1.0, seed: int = 5) -> list[Check]:
    """Accepted fraction over n proposals against quadrature of Z_target/Z_env."""
    rng = np.random.default_rng(seed)
    n = _n(10**5, scale)
    semi = _semi_suite(rng, 6)
    fin = _finite_suite(rng, 6)[:50 - len(semi)]
    rows = []
    for i, p in enumerate(semi + fin):
        s = RandomStream(seed * 1000 + i)
        if isinstance(p, SF.SemiFiniteProblem):
            acc, _ = SF.empirical_acceptance(p, n, s, table)
            label = p.case.name
            q = O.semifinite_acceptance(O.BoxSpec(p.rho, p.a1, p.a2), label).value
        else:
            prm = p.params()
            acc, _ = F.empirical_acceptance(p, n, s, table)
            label = _finite_label(prm)
            q = O.finite_acceptance(O.BoxSpec(p.rho, p.a1, p.a2, p.b1, p.b2),
                                    F.envelope_description(prm)).value
        se = math.sqrt(max(q * (1.0 - q), 1e-300) / n)
        rows.append((label, float(acc), float(q), float((acc - q) / se)))
    zmax = max(abs(r[3]) for r in rows)
    return [Check(10, f"oracle vs empirical acceptance ({len(rows)} problems)",
                  zmax <= 3.0 and len(rows) == 50, zmax, 3.0,
                  detail={"cases": sorted({r[0] for r in rows}),
                          "rows": [dict(zip(("case", "empirical", "quadrature", "z"), r))
                                   for r in rows]})]


def _chi2_one(draw, spec: O.BoxSpec, n: int, pilot: np.ndarray) -> float:
    e1 = O.grid_edges(pilot[:, 0], 20)
    e2 = O.grid_edges(pilot[:, 1], 20)
    x = draw(n)
    counts = np.histogram2d(x[:, 0], x[:, 1], bins=(e1, e2))[0]
    probs = O.box_cell_probabilities(spec, e1, e2)
    return O.chi2_grid_test(counts, probs)


def bivariate_exactness(table: RegionTable, scale: float = 1.0, seed: int = 11) -> list[Check]:
    """20x20 chi-square grid tests against quadrature cell probabilities."""
    rng = np.random.default_rng(seed)
    n = _n(2 * 10**5, scale, 2000)
    pvals = []
    semi = [(rng.uniform(-0.95, 0.95), *rng.normal(0.0, 1.5, 2)) for _ in range(10)]
    for i, (rho, a1, a2) in enumerate(semi):
        p = SF.SemiFiniteProblem.make(rho, a1, a2)
        pilot = SF.sample_many(p, 20000, RandomStream(seed + 100 + i), table)
        draw = lambda m, p=p, i=i: SF.sample_many(p, m, RandomStream(seed + 200 + i), table)
        pv = _chi2_one(draw, O.BoxSpec(rho, a1, a2), n, pilot)
        pvals.append(("semi", p.case.name if p.rho else "Indep", (rho, a1, a2), pv))
    fin = []
    while len(fin) < 10:
        rho = rng.uniform(-0.95, 0.95)
        a = rng.normal(0.0, 2.0, 2)
        b = a + 2.0 * rng.standard_exponential(2)
        if O.box_probability(O.BoxSpec(rho, a[0], a[1], b[0], b[1])) > 1e-12:
            fin.append((rho, a[0], b[0], a[1], b[1]))
    for i, raw in enumerate(fin):
        p = F.canonicalize(*raw)
        pilot = F.sample_many(p, 20000, RandomStream(seed + 300 + i), table)
        draw = lambda m, p=p, i=i: F.sample_many(p, m, RandomStream(seed + 400 + i), table)
        rho, a1, b1, a2, b2 = raw
        pv = _chi2_one(draw, O.BoxSpec(rho, a1, a2, b1, b2), n, pilot)
        pvals.append(("finite", _finite_label(p.params()), raw, pv))
    pmin = min(r[3] for r in pvals)
    return [Check(11, "bivariate chi-square grid tests (10 semi-finite, 10 finite)",
                  pmin > 1e-3, pmin, 1e-3,
                  detail={"rows": [{"family": f, "case": c, "params": [float(v) for v in pr],
                                    "p_value": pv} for f, c, pr, pv in pvals]})]


# --------------------------------------------------------------------------
# multivariate

MV_PROBLEMS = (
    ("d3 identity", np.eye(3), (1.0, 0.5, 0.3)),
    ("d3 equicorrelated 0.5", 0.5 * np.eye(3) + 0.5, (1.0, 0.5, 0.3)),
    ("d3 equicorrelated -0.4", 1.4 * np.eye(3) - 0.4, (0.3, 0.0, -0.2)),
    ("d4 identity", np.eye(4), (1.0, 0.5, 0.3, 0.0)),
    ("d4 equicorrelated 0.4", 0.6 * np.eye(4) + 0.4, (1.0, 0.5, 0.3, 0.0)),
    ("d4 equicorrelated -0.16", 1.16 * np.eye(4) - 0.16, (1.0, 0.6, 0.5, -0.3)),
)


def multivariate_chains(table: RegionTable, scale: float = 1.0, seed: int = 3) -> list[Check]:
    """Chain acceptance against 2^-(d-1) and moments against brute force."""
    n = _n(10**5, scale, 2000)
    out = []
    for j, (name, sigma, a) in enumerate(MV_PROBLEMS):
        p = M.MultivariateProblem.make(sigma, np.array(a))
        cnt = C.Counters()
        x = M.try_sample(p, n, RandomStream(seed + j), table, cnt)
        if isinstance(x, M.NotApplicable):
            out.append(Check(12, f"{name}: chain applies", False, detail={"failures": x.failures}))
            continue
        chain = "plus" if M.first_failure(p, "plus") is None else "minus"
        d = p.d
        att, acc = cnt.array[C.MV_ATTEMPTS], cnt.array[C.MV_ACCEPTS]
        rate = acc / att
        floor = 2.0 ** -(d - 1)
        thr = floor - 3.0 * math.sqrt(floor * (1.0 - floor) / att)
        out.append(Check(12, f"{name} ({chain}): overall acceptance", bool(rate >= thr),
                         float(rate), thr))
        ref = O.brute_force_box_sampler(sigma, np.array(a), rng=np.random.default_rng(seed + 50 + j),
                                        n=n)
        z = []
        for k in range(d):
            for f in (lambda v: v, lambda v: (v - ref[:, k].mean()) ** 2):
                u, w = f(x[:, k]), f(ref[:, k])
                se = math.sqrt(u.var() / u.size + w.var() / w.size)
                z.append(float((u.mean() - w.mean()) / se))
        zmax = max(abs(v) for v in z)
        ok = zmax <= 3.0 and bool(np.all(np.isfinite(x))) and bool(np.all(x >= np.array(a) - 1e-12))
        out.append(Check(12, f"{name} ({chain}): means and variances vs brute force", ok,
                         zmax, 3.0, detail={"z": z}))
    return out


# --------------------------------------------------------------------------
# bounds


def sminus_floor_checks(scale: float = 1.0) -> list[Check]:
    floor = O.sminus_rate_floor().value
    out = [Check(7, "S- acceptance floor by quadrature", abs(floor - 0.416) <= 0.005, floor, 0.416,
                 detail={"tolerance": 0.005})]
    m = max(6, int(round(16 * min(scale, 1.0) ** (1 / 3))))
    rates = []
    for rho in np.linspace(-0.99, -0.01, m):
        # S- domain: rho a1 <= a2 <= a1, nonempty only for a1 >= 0
        for a1 in np.linspace(0.0, 6.0, m):
            for a2 in np.linspace(rho * a1, a1, m):
                rates.append((O.sminus_rate(rho, a1, a2), rho, a1, a2))
    lo = min(rates)
    out.append(Check(7, "S- oracle rate grid minimum", lo[0] >= 0.416 - 1e-9, lo[0], 0.416,
                     detail={"argmin": [float(v) for v in lo[1:]], "grid_points": len(rates)}))
    return out


def mplus_regime(scale: float = 1.0) -> list[Check]:
    """M+ oracle acceptance where the normalised gap (a2 - rho a1)/nu exceeds x_d.

    Canonical problems (a1 >= a2) with gap g need a1 >= nu g / (1 - rho).
    """
    m = max(5, int(round(10 * min(scale, 1.0) ** (1 / 3))))
    rates = []
    for rho in np.linspace(0.02, 0.98, m):
        nu = math.sqrt((1.0 - rho) * (1.0 + rho))
        for gap in X_D + np.geomspace(1e-6, 6.0, m):
            a1_lo = nu * gap / (1.0 - rho)
            for a1 in a1_lo + np.linspace(0.0, 6.0, m):
                a2 = rho * a1 + nu * gap
                p = SF.SemiFiniteProblem.make(rho, a1, a2)
                if p.case != SF.CaseLabel.MPlus or (p.a2 - p.rho * p.a1) / nu <= X_D:
                    continue
                q = O.semifinite_acceptance(O.BoxSpec(p.rho, p.a1, p.a2), "MPlus").value
                rates.append((q, p.rho, p.a1, p.a2))
    lo = min(rates)
    return [Check(8, "M+ oracle acceptance minimum in the gap > x_d regime",
                  len(rates) > 0 and lo[0] >= 0.22, lo[0], 0.22,
                  detail={"argmin": [float(v) for v in lo[1:]], "grid_points": len(rates)})]


# --------------------------------------------------------------------------
# speed


def relative_speed(table: RegionTable, scale: float = 1.0, seed: int = 0) -> tuple[list[Check], list]:
    n = _n(10**7, scale, 10**5)
    grid = np.linspace(-2.0, 2.0, 9)
    rows = E.bench(grid, ("table", "geweke-robert"), n, 3, seed, table)
    thr = {}
    for a, alg, _, _, dps, _, _ in rows:
        thr.setdefault(a, {})[alg] = dps
    ratios = {a: v["table"] / v["geweke-robert"] for a, v in thr.items()}
    worst = min(ratios, key=ratios.get)
    return [
        Check(4, "table throughput >= geweke-robert on [-2, 2]", ratios[worst] >= 1.0,
              ratios[worst], 1.0, detail={"ratios": {str(k): v for k, v in ratios.items()}}),
        Check(4, "table throughput >= 1.5x geweke-robert at a=0", ratios[0.0] >= 1.5,
              ratios[0.0], 1.5, hard=False),
    ], rows


# --------------------------------------------------------------------------
# suites


def run_suite(suite: str, table: RegionTable | None = None, scale: float = 1.0,
              seed: int = 0) -> list[Check]:
    table = default_table() if table is None else table
    if suite == "univariate":
        return (ks_univariate(table, scale, seed + 1) + fast_path_acceptance(table, scale, seed + 7)
                + table_memory(table) + stability(table, seed + 13))
    if suite == "bivariate":
        return (histogram_checks("fig3", table, scale, seed + 2024)[0]
                + histogram_checks("fig4", table, scale, seed + 2024)[0]
                + domination(scale, seed + 99) + oracle_vs_empirical(table, scale, seed + 5)
                + bivariate_exactness(table, scale, seed + 11))
    if suite == "multivariate":
        return multivariate_chains(table, scale, seed + 3)
    if suite == "bounds":
        return sminus_floor_checks(scale) + mplus_regime(scale)
    if suite == "speed":
        return relative_speed(table, scale, seed)[0]
    raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
