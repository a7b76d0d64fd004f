"""Equal-area region decomposition of the standard normal density.

The real line is cut at edges ``x_{-N} < ... < x_0 = 0 < ... < x_N``.  The
``2N`` rectangles ``[x_i, x_{i+1}] x [0, y_i]`` and the two tails beyond
``x_{+-N}`` all have the same area ``v``.  Regions are indexed globally
from ``-N-1`` (left tail) to ``N`` (right tail).

Only regions ``i_lo .. N-1`` are kept in the hot arrays, where ``i_lo`` is
the region holding ``a_min``; the negative half is recovered by symmetry.
"""

from __future__ import annotations

import io
import json
import math
import os
import struct
import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numba import njit

from . import _packed as P
from .special import Phi, phi

MAGIC = b"TGRT"
FORMAT_VERSION = 1
DEFAULT_NS = 4000
NS_CHOICES = (1000, 2000, 4000)
A_MIN = -2.0
#: a_max is the edge this many regions below the right tail
A_MAX_OFFSET = 20
ENV_TABLE = "TRUNCGAUSS_TABLE"

_HEADER = struct.Struct("<4sI5q4d")


class TableError(ValueError):
    """Raised for corrupt, mismatched or invalid table data."""


@njit(cache=True)
def _forward_edges(v, n):
    x = np.empty(n + 1)
    x[0] = 0.0
    for i in range(n):
        p = phi(x[i])
        x[i + 1] = x[i] + v / p if p > 0.0 else math.inf
        if not math.isfinite(x[i + 1]):
            for k in range(i + 1, n + 1):
                x[k] = math.inf
            break
    return x


def _solve_area(n: int, max_iter: int = 400) -> tuple[float, np.ndarray]:
    # tail mass beyond x_N minus v is strictly decreasing in v
    def gap(v):
        x = _forward_edges(v, n)
        return Phi(-x[n]) - v, x

    lo, hi = 0.0, 2.0 / n
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g, _ = gap(mid)
        if g > 0.0:
            lo = mid
        else:
            hi = mid
    else:
        raise TableError(f"area bisection did not converge for N={n}")
    g_lo, x_lo = gap(lo)
    g_hi, x_hi = gap(hi)
    if abs(g_lo) <= abs(g_hi):
        return lo, x_lo
    return hi, x_hi


@dataclass(eq=False)
class RegionTable:
    N: int
    v: float
    h: float
    a_min: float
    a_max: float
    i_lo: int
    k_lo: int
    k_hi: int
    x: np.ndarray  # edges x_{i_lo} .. x_N
    y: np.ndarray
    ylow: np.ndarray
    d: np.ndarray
    delta: np.ndarray
    j: np.ndarray  # int32, j[k - k_lo]
    _packed: tuple | None = field(default=None, repr=False)

    @property
    def n_stored(self) -> int:
        return self.N - self.i_lo

    @property
    def x_N(self) -> float:
        return float(self.x[-1])

    def edge(self, i: int) -> float:
        """Edge x_i for any -N <= i <= N."""
        if i < 0:
            return -self.edge(-i)
        return float(self.x[i - self.i_lo])

    @property
    def edges(self) -> np.ndarray:
        """Full edge list x_{-N} .. x_N."""
        pos = self.x[-self.i_lo:]
        return np.concatenate((-pos[:0:-1], pos))

    def area_upto(self, i: int) -> float:
        """A(i): total region area of regions -N-1 .. i."""
        return (i + self.N + 2) * self.v

    def index_of(self, a: float) -> int:
        """i_a = j_{floor(a/h)} for a in [a_min, a_max]."""
        if not self.a_min <= a <= self.a_max:
            raise ValueError("a outside the lookup window")
        k = math.floor(a / self.h)
        if k * self.h > a:
            k -= 1
        return int(self.j[min(max(k, self.k_lo), self.k_hi) - self.k_lo])

    @property
    def nbytes(self) -> int:
        arrays = (self.x, self.y, self.ylow, self.d, self.delta, self.j)
        return int(sum(a.nbytes for a in arrays))

    @property
    def packed(self) -> tuple:
        if self._packed is None:
            meta = np.zeros(P.META_LEN)
            meta[P.M_N] = self.N
            meta[P.M_ILO] = self.i_lo
            meta[P.M_H] = self.h
            meta[P.M_AMIN] = self.a_min
            meta[P.M_AMAX] = self.a_max
            meta[P.M_V] = self.v
            meta[P.M_KLO] = self.k_lo
            meta[P.M_KHI] = self.k_hi
            meta[P.M_XN] = self.x_N
            rows = np.ascontiguousarray(
                np.column_stack((self.x[:-1], self.ylow / self.y, self.delta)))
            self._packed = (self.x, self.y, self.ylow, self.d, self.delta, self.j, meta, rows)
        return self._packed

    def equals(self, other: "RegionTable") -> bool:
        scal = ("N", "v", "h", "a_min", "a_max", "i_lo", "k_lo", "k_hi")
        if any(getattr(self, s) != getattr(other, s) for s in scal):
            return False
        arrs = ("x", "y", "ylow", "d", "delta", "j")
        return all(np.array_equal(getattr(self, s), getattr(other, s)) for s in arrs)

    def validate(self, rtol: float = 1e-12) -> None:
        """Raise :class:`TableError` unless every structural invariant holds."""
        ns = self.n_stored
        if self.N < 8 or ns <= 0 or self.i_lo > 0:
            raise TableError("bad table dimensions")
        for name in ("y", "ylow", "d", "delta"):
            if getattr(self, name).shape != (ns,):
                raise TableError(f"{name}: wrong length")
        if self.x.shape != (ns + 1,) or self.j.shape != (self.k_hi - self.k_lo + 1,):
            raise TableError("x or j: wrong length")
        if self.x[-self.i_lo] != 0.0:
            raise TableError("x_0 must be 0")
        if not np.all(np.diff(self.x) > 0.0):
            raise TableError("edges not increasing")
        if not np.allclose(self.d * self.y, self.v, rtol=rtol, atol=0.0):
            raise TableError("rectangle areas differ from v")
        if abs(Phi(-self.x_N) - self.v) > rtol * self.v:
            raise TableError("tail area differs from v")
        if np.any(self.ylow > self.y) or np.any(self.delta < self.d):
            raise TableError("height ordering violated")
        if self.h > self.d.min() * (1.0 + 1e-15):
            raise TableError("h exceeds the narrowest rectangle")
        if not (self.a_min < 0.0 < self.a_max):
            raise TableError("window must straddle 0")
        e = self.edges
        k = np.arange(self.k_lo, self.k_hi + 1)
        want = np.searchsorted(e, k * self.h, side="right") - 1 - self.N
        if not np.array_equal(want, self.j):
            raise TableError("index table inconsistent with edges")
        if self.j[0] < self.i_lo:
            raise TableError("index table reaches below stored regions")


def _heights(lo_edge: np.ndarray, hi_edge: np.ndarray):
    p_lo = np.exp(-0.5 * lo_edge * lo_edge) / math.sqrt(2.0 * math.pi)
    p_hi = np.exp(-0.5 * hi_edge * hi_edge) / math.sqrt(2.0 * math.pi)
    return np.maximum(p_lo, p_hi), np.minimum(p_lo, p_hi)


def _assemble(n: int, v: float, pos: np.ndarray, a_min: float, a_max: float) -> RegionTable:
    h = float(pos[1] - pos[0])
    edges = np.concatenate((-pos[:0:-1], pos))
    k_lo = math.floor(a_min / h)
    if k_lo * h > a_min:
        k_lo -= 1
    k_hi = math.floor(a_max / h)
    if k_hi * h > a_max:
        k_hi -= 1
    k = np.arange(k_lo, k_hi + 1)
    j = (np.searchsorted(edges, k * h, side="right") - 1 - n).astype(np.int32)
    i_lo = int(j[0])
    x = edges[i_lo + n:].copy()
    lo_e, hi_e = x[:-1], x[1:]
    y, ylow = _heights(lo_e, hi_e)
    d = hi_e - lo_e
    delta = d * y / ylow
    return RegionTable(N=n, v=v, h=h, a_min=a_min, a_max=a_max, i_lo=i_lo,
                       k_lo=k_lo, k_hi=k_hi, x=x, y=y, ylow=ylow, d=d,
                       delta=delta, j=j)


def build_regions(N: int, a_min: float = A_MIN, a_max: float | None = None) -> RegionTable:
    """Build the decomposition with ``2N`` rectangles and its lookup index.

    ``a_max`` defaults to ``x_{N-20}``.  Deterministic: the same arguments
    give a bit-identical table.
    """
    if N < 8:
        raise ValueError("N must be at least 8")
    v, pos = _solve_area(N)
    # small demo tables (x_N < 2) shrink the window to the inner half
    small = N <= 2 * A_MAX_OFFSET
    if a_max is None:
        a_max = float(pos[N // 2 if small else N - A_MAX_OFFSET])
    if small:
        a_min = max(a_min, -float(pos[N // 2]))
    return build_index(N, v, pos, a_min, a_max)


def build_index(N: int, v: float, pos: np.ndarray, a_min: float, a_max: float) -> RegionTable:
    """Attach the j-index for the window [a_min, a_max] to the positive edges ``pos``."""
    if not (-pos[N] <= a_min < 0.0 < a_max <= pos[N]):
        raise ValueError("index window must lie inside [x_{-N}, x_N] and contain 0")
    return _assemble(N, v, np.asarray(pos, dtype=np.float64), float(a_min), float(a_max))


def stored_count(N: int) -> int:
    return build_regions(N).n_stored


def table_for_ns(target: int = DEFAULT_NS) -> RegionTable:
    """Largest-N table whose stored region count does not exceed ``target``."""
    if target < 200:
        raise ValueError("target too small")
    # N_s grows monotonically with N; bracket then bisect on N
    lo, hi = 64, 128
    while build_regions(hi).n_stored <= target:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if build_regions(mid).n_stored <= target:
            lo = mid
        else:
            hi = mid
    return build_regions(lo)


# --------------------------------------------------------------------------
# persistence


def _header_bytes(t: RegionTable) -> bytes:
    return _HEADER.pack(MAGIC, FORMAT_VERSION, t.N, t.i_lo, t.k_lo, t.k_hi,
                        t.n_stored, t.v, t.h, t.a_min, t.a_max)


def to_bytes(t: RegionTable) -> bytes:
    buf = io.BytesIO()
    buf.write(_header_bytes(t))
    for a in (t.x, t.y, t.ylow, t.d, t.delta):
        buf.write(a.astype("<f8").tobytes())
    buf.write(t.j.astype("<i4").tobytes())
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


def from_bytes(raw: bytes, validate: bool = True) -> RegionTable:
    if len(raw) < _HEADER.size + 4:
        raise TableError("checksum failure: file too short")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise TableError("checksum failure")
    magic, ver, n, i_lo, k_lo, k_hi, ns, v, h, a_min, a_max = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise TableError("not a region table file")
    if ver != FORMAT_VERSION:
        raise TableError(f"format version {ver} not supported (expected {FORMAT_VERSION})")
    nk = k_hi - k_lo + 1
    if len(body) != _HEADER.size + 8 * (5 * ns + 1) + 4 * nk:
        raise TableError("payload length does not match header")
    off = _HEADER.size
    arrs = []
    for length in (ns + 1, ns, ns, ns, ns):
        arrs.append(np.frombuffer(body, dtype="<f8", count=length, offset=off).astype(np.float64))
        off += 8 * length
    j = np.frombuffer(body, dtype="<i4", count=nk, offset=off).astype(np.int32)
    t = RegionTable(N=n, v=v, h=h, a_min=a_min, a_max=a_max, i_lo=i_lo, k_lo=k_lo,
                    k_hi=k_hi, x=arrs[0], y=arrs[1], ylow=arrs[2], d=arrs[3],
                    delta=arrs[4], j=j)
    if validate:
        t.validate()
    return t


def save_table(table: RegionTable, destination: str | os.PathLike) -> None:
    Path(destination).write_bytes(to_bytes(table))


def load_table(source: str | os.PathLike) -> RegionTable:
    return from_bytes(Path(source).read_bytes())


def to_json(table: RegionTable) -> str:
    """JSON export with 17 significant digits, for cross-implementation diffs."""
    def fl(a):
        return [float(format(float(z), ".17g")) for z in a]

    doc = {
        "format_version": FORMAT_VERSION,
        "N": table.N, "N_s": table.n_stored, "i_lo": table.i_lo,
        "k_lo": table.k_lo, "k_hi": table.k_hi,
        "v": format(table.v, ".17g"), "h": format(table.h, ".17g"),
        "a_min": format(table.a_min, ".17g"), "a_max": format(table.a_max, ".17g"),
        "x": fl(table.x), "y": fl(table.y), "ylow": fl(table.ylow),
        "d": fl(table.d), "delta": fl(table.delta), "j": [int(z) for z in table.j],
    }
    return json.dumps(doc)


# --------------------------------------------------------------------------
# default tables

_DATA_DIR = Path(__file__).with_name("data")


def data_path(n_s: int) -> Path:
    return _DATA_DIR / f"regions_ns{n_s}.bin"


def _cache_path(n_s: int) -> Path:
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(Path.home(), ".cache")
    return Path(base) / "truncgauss" / f"regions_ns{n_s}_v{FORMAT_VERSION}.bin"


@lru_cache(maxsize=None)
def _cached(n_s: int, env: str | None) -> RegionTable:
    if env and n_s == DEFAULT_NS:
        return load_table(env)
    for p in (data_path(n_s), _cache_path(n_s)):
        if p.exists():
            try:
                return load_table(p)
            except TableError:
                pass
    t = table_for_ns(n_s)
    try:
        cp = _cache_path(n_s)
        cp.parent.mkdir(parents=True, exist_ok=True)
        save_table(t, cp)
    except OSError:
        pass
    return t


def default_table(n_s: int = DEFAULT_NS) -> RegionTable:
    """Shared table for ``n_s`` stored regions.

    Lookup order: ``$TRUNCGAUSS_TABLE`` (default size only), the copy shipped
    with the package, the user cache, then a fresh build written to the cache.
    """
    return _cached(int(n_s), os.environ.get(ENV_TABLE))
