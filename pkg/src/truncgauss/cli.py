"""Command-line front end.

Subcommands: ``gen-tables``, ``sample``, ``bench``, ``histogram`` and
``validate``.  Every output embeds a run manifest (CSV: ``#`` comment lines;
JSON: a ``manifest`` key; binary: a length-prefixed JSON header).

Exit codes: 0 success, 1 validation failure, 2 usage or parameter error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import struct
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as E
from . import finite as F
from . import multivariate as M
from . import semifinite as SF
from . import tables as T
from . import univariate as U
from . import validation as V
from .rng import RandomStream

SCHEMA_VERSION = 1
BIN_MAGIC = b"TGSM"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Invalid flags or parameter combination; exit status 2."""


# --------------------------------------------------------------------------
# manifest and output


def _table_identity(table: T.RegionTable, source: str) -> dict:
    return {"source": source, "N": table.N, "N_s": table.n_stored, "bytes": table.nbytes,
            "sha256": hashlib.sha256(T.to_bytes(table)).hexdigest()}


def _load_table(path: str | None, n_s: int = T.DEFAULT_NS) -> tuple[T.RegionTable, dict]:
    if path:
        try:
            table = T.load_table(path)
        except (OSError, T.TableError) as exc:
            raise UsageError(f"cannot load table {path}: {exc}") from exc
        return table, _table_identity(table, str(path))
    env = os.environ.get(T.ENV_TABLE)
    table = T.default_table(n_s)
    return table, _table_identity(table, env or f"default N_s={n_s}")


def manifest(subcommand: str, seed: int | None, table_id: dict | None, params: dict,
             counts: dict, timings: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommand": subcommand,
        "seed": seed,
        "table": table_id,
        "parameters": params,
        "counts": counts,
        "timings_seconds": timings,
        "version": {"truncgauss": __version__, "numpy": np.__version__,
                    "python": platform.python_version()},
    }


@contextmanager
def _sink(out: str | None, binary: bool):
    if out in (None, "-"):
        yield sys.stdout.buffer if binary else sys.stdout
        return
    mode = "wb" if binary else "w"
    with open(out, mode, newline="" if not binary else None) as fh:
        yield fh


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _clean(v):
    """Strict-JSON copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.integer, bool, np.bool_)):
        return v.item() if hasattr(v, "item") else v
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    return v


def write_csv(out, man: dict, columns, rows) -> None:
    with _sink(out, False) as fh:
        for line in json.dumps(_clean(man), indent=1, allow_nan=False).splitlines():
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")


def write_json(out, man: dict, body: dict) -> None:
    with _sink(out, False) as fh:
        json.dump(_clean({"manifest": man, **body}), fh, indent=1, allow_nan=False)
        fh.write("\n")


def write_bin(out, man: dict, arr: np.ndarray) -> None:
    """Magic, u32 manifest length, manifest JSON, u64 rows, u32 cols, f64 LE rows."""
    arr = np.ascontiguousarray(np.atleast_2d(arr.T).T, dtype="<f8")
    head = json.dumps(_clean(man), allow_nan=False).encode()
    with _sink(out, True) as fh:
        fh.write(BIN_MAGIC + struct.pack("<I", len(head)) + head)
        fh.write(struct.pack("<QI", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_bin(raw: bytes) -> tuple[dict, np.ndarray]:
    """Inverse of :func:`write_bin`."""
    if raw[:4] != BIN_MAGIC:
        raise ValueError("not a truncgauss sample file")
    (mlen,) = struct.unpack_from("<I", raw, 4)
    man = json.loads(raw[8:8 + mlen])
    off = 8 + mlen
    rows, cols = struct.unpack_from("<QI", raw, off)
    data = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=off + 12)
    return man, data.reshape(rows, cols)


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_tables(args) -> int:
    t0 = time.perf_counter()
    table = T.table_for_ns(args.ns)
    table.validate()
    built = time.perf_counter() - t0
    if args.format == "json":
        payload = T.to_json(table).encode()
    elif args.format == "bin":
        payload = T.to_bytes(table)
    else:
        raise UsageError("gen-tables writes bin or json")
    if args.out in (None, "-"):
        raise UsageError("gen-tables needs --out")
    Path(args.out).write_bytes(payload)
    man = manifest("gen-tables", None, _table_identity(table, str(args.out)),
                   {"N_s_target": args.ns, "format": args.format}, {"regions": table.N},
                   {"build": built})
    Path(str(args.out) + ".manifest.json").write_text(json.dumps(_clean(man), indent=1) + "\n")
    print(f"N_s={table.n_stored} N={table.N} footprint={table.nbytes} bytes "
          f"({table.nbytes / 1000:.1f} kB) -> {args.out}")
    return EXIT_OK


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse number list {text!r}") from exc


def _parse_matrix(text: str) -> np.ndarray:
    try:
        if os.path.exists(text):
            text = Path(text).read_text()
        m = np.array(json.loads(text), dtype=float)
    except (ValueError, OSError) as exc:
        raise UsageError(f"--sigma must be a JSON matrix or a file holding one: {exc}") from exc
    if m.ndim != 2:
        raise UsageError("--sigma must be two-dimensional")
    return m


def _sample_draws(args, table, stream) -> tuple[np.ndarray, list[str], dict]:
    n = args.n
    dist = args.dist
    try:
        if dist == "tn1":
            if not args.a < args.b:
                raise UsageError(f"tn1 needs a < b (got a={args.a}, b={args.b})")
            if not args.sigma_1d > 0:
                raise UsageError("tn1 needs sigma > 0")
            spec = U.UnivariateSpec(args.a, args.b, args.mu, args.sigma_1d)
            lo, hi = spec.standardized
            x = args.mu + args.sigma_1d * U.draw(args.algorithm, lo, n, stream, table, b=hi)
            return x[:, None], ["x"], {"a": args.a, "b": args.b, "mu": args.mu,
                                        "sigma": args.sigma_1d, "algorithm": args.algorithm}
        if dist == "tn2-semi":
            p = SF.SemiFiniteProblem.make(args.rho, args.a1, args.a2)
            x = SF.sample_many(p, n, stream, table)
            return x, ["x1", "x2"], {"rho": args.rho, "a1": args.a1, "a2": args.a2,
                                      "case": p.case.name if p.rho else "Indep"}
        if dist == "tn2-box":
            p = F.canonicalize(args.rho, args.a1, args.b1, args.a2, args.b2)
            prm = p.params()
            x = F.sample_many(p, n, stream, table)
            return x, ["x1", "x2"], {"rho": args.rho, "a1": args.a1, "b1": args.b1,
                                      "a2": args.a2, "b2": args.b2,
                                      "case": F.FiniteCase(int(prm[F.F_CASE])).name}
        if dist == "tnd":
            if args.sigma is None or args.bounds is None:
                raise UsageError("tnd needs --sigma and --bounds")
            sigma = _parse_matrix(args.sigma)
            a = np.array(_parse_floats(args.bounds))
            p = M.MultivariateProblem.make(sigma, a)
            x = M.try_sample(p, n, stream, table)
            if isinstance(x, M.NotApplicable):
                msg = "; ".join(f"{chain} chain fails condition at k={k}: {why}"
                                for chain, (k, why) in x.failures.items())
                raise UsageError(f"NotApplicable: {msg}")
            chain = "plus" if M.first_failure(p, "plus") is None else "minus"
            return x, [f"x{i + 1}" for i in range(p.d)], {"sigma": sigma.tolist(),
                                                          "a": a.tolist(), "chain": chain}
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown distribution {dist!r}")


def cmd_sample(args) -> int:
    if args.n < 0:
        raise UsageError("--n must be non-negative")
    table, tid = _load_table(args.table)
    stream = RandomStream(args.seed)
    t0 = time.perf_counter()
    x, cols, params = _sample_draws(args, table, stream)
    dt = time.perf_counter() - t0
    params = {"dist": args.dist, **params}
    man = manifest("sample", args.seed, tid, params, {"n": int(x.shape[0])}, {"sample": dt})
    if args.format == "csv":
        write_csv(args.out, man, cols, x.tolist())
    elif args.format == "json":
        write_json(args.out, man, {"columns": cols, "samples": x.tolist()})
    else:
        write_bin(args.out, man, x)
    return EXIT_OK


def _parse_grid(text: str) -> np.ndarray:
    """'lo:hi:count' or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("--a-grid range form is lo:hi:count")
        try:
            lo, hi, k = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise UsageError(f"bad --a-grid {text!r}") from exc
        if k < 1:
            raise UsageError("--a-grid count must be >= 1")
        return np.linspace(lo, hi, k)
    return np.array(_parse_floats(text))


def cmd_bench(args) -> int:
    algs = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    unknown = [a for a in algs if a not in U.ALGORITHMS]
    if unknown:
        raise UsageError(f"unknown algorithm(s): {', '.join(unknown)}")
    grid = _parse_grid(args.a_grid)
    table, tid = _load_table(args.table, args.ns)
    t0 = time.perf_counter()
    rows = E.bench(grid, algs, args.n, args.repeats, args.seed, table)
    man = manifest("bench", args.seed, tid,
                   {"algorithms": list(algs), "a_grid": grid.tolist(), "repeats": args.repeats},
                   {"n_per_point": args.n}, {"total": time.perf_counter() - t0})
    if args.format == "json":
        write_json(args.out, man, {"columns": list(E.BENCH_COLUMNS),
                                   "rows": [list(r) for r in rows]})
    else:
        write_csv(args.out, man, E.BENCH_COLUMNS, rows)
    return EXIT_OK


def cmd_histogram(args) -> int:
    table, tid = _load_table(args.table)
    t0 = time.perf_counter()
    res = E.histogram(args.experiment, args.n_problems, args.n_props, args.seed, table)
    summ = res.summary()
    man = manifest("histogram", args.seed, tid, {"experiment": args.experiment},
                   {"n_problems": args.n_problems, "n_props": args.n_props},
                   {"total": time.perf_counter() - t0})
    man["summary"] = summ
    if args.format == "json":
        write_json(args.out, man, {"columns": list(E.HIST_COLUMNS),
                                   "rows": [list(r) for r in res.rows]})
    else:
        write_csv(args.out, man, E.HIST_COLUMNS, res.rows)
    if args.out not in (None, "-"):
        print(f"{args.experiment}: min={summ['min']:.4f} q01={summ['q01']:.4f} "
              f"q10={summ['q10']:.4f} median={summ['median']:.4f}")
    return EXIT_OK


def cmd_validate(args) -> int:
    suites = args.suite or ["univariate", "bivariate", "multivariate", "bounds"]
    table, tid = _load_table(args.table)
    t0 = time.perf_counter()
    checks = []
    timings = {}
    for s in suites:
        ts = time.perf_counter()
        for c in V.run_suite(s, table, args.scale, args.seed):
            checks.append((s, c))
            print(c.line(), file=sys.stderr)
        timings[s] = time.perf_counter() - ts
    timings["total"] = time.perf_counter() - t0
    failed = [c for _, c in checks if c.hard and not c.passed]
    man = manifest("validate", args.seed, tid, {"suites": suites, "scale": args.scale},
                   {"checks": len(checks), "failed": len(failed)}, timings)
    write_json(args.out, man, {"passed": not failed,
                               "checks": [{"suite": s, **c.as_dict()} for s, c in checks]})
    return EXIT_FAIL if failed else EXIT_OK


# --------------------------------------------------------------------------
# parser


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from exc
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="truncgauss", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"truncgauss {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, formats=("csv", "json"), default="csv", seed=True, table=True):
        if seed:
            p.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
        if table:
            p.add_argument("--table", help=f"region table file (default: ${T.ENV_TABLE} "
                                           "or the packaged table)")
        p.add_argument("--format", choices=formats, default=default)
        p.add_argument("--out", help="output path (default: stdout)")

    g = sub.add_parser("gen-tables", help="build a region table file")
    g.add_argument("--ns", type=int, default=T.DEFAULT_NS, help="stored-region target N_s")
    common(g, ("bin", "json"), "bin", seed=False, table=False)
    g.set_defaults(func=cmd_gen_tables)

    s = sub.add_parser("sample", help="draw samples")
    s.add_argument("--dist", required=True, choices=("tn1", "tn2-semi", "tn2-box", "tnd"))
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--a", type=float, default=0.0, help="tn1 lower bound")
    s.add_argument("--b", type=float, default=math.inf, help="tn1 upper bound")
    s.add_argument("--mu", type=float, default=0.0, help="tn1 mean")
    s.add_argument("--sd", dest="sigma_1d", type=float, default=1.0, help="tn1 std deviation")
    s.add_argument("--algorithm", default="table", choices=tuple(U.ALGORITHMS))
    s.add_argument("--rho", type=float, default=0.0)
    s.add_argument("--a1", type=float, default=0.0)
    s.add_argument("--a2", type=float, default=0.0)
    s.add_argument("--b1", type=float, default=math.inf)
    s.add_argument("--b2", type=float, default=math.inf)
    s.add_argument("--sigma", help="tnd covariance: JSON matrix or a file holding one")
    s.add_argument("--bounds", help="tnd lower bounds, comma separated")
    common(s, ("csv", "bin", "json"))
    s.set_defaults(func=cmd_sample)

    b = sub.add_parser("bench", help="time univariate samplers over a grid of a")
    b.add_argument("--a-grid", default="-2:3:11", help="lo:hi:count or a comma list")
    b.add_argument("--algorithms", default=",".join(E.BENCH_ALGORITHMS))
    b.add_argument("--n", type=int, default=10_000_000, help="draws per grid point")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--ns", type=int, default=T.DEFAULT_NS, help="table size when --table is unset")
    common(b)
    b.set_defaults(func=cmd_bench)

    h = sub.add_parser("histogram", help="per-problem acceptance rates")
    h.add_argument("--experiment", required=True, choices=("fig3", "fig4"))
    h.add_argument("--n-problems", type=int, default=10_000)
    h.add_argument("--n-props", type=int, default=1000)
    common(h)
    h.set_defaults(func=cmd_histogram)

    v = sub.add_parser("validate", help="run acceptance suites, JSON report")
    v.add_argument("--suite", action="append", choices=V.SUITES,
                   help="repeatable; default: univariate, bivariate, multivariate, bounds")
    v.add_argument("--scale", type=float, default=1.0,
                   help="multiplier on sample counts (thresholds unchanged)")
    common(v, ("json",), "json")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    for name in ("n", "n_problems", "n_props", "repeats"):
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 0:
            print(f"error: --{name.replace('_', '-')} must be non-negative", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
