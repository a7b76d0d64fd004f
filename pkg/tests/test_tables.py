import math

import numpy as np
import pytest
import scipy.special as sp

from truncgauss import tables as T


def test_default_table_footprint(table):
    table.validate()
    assert table.n_stored <= T.DEFAULT_NS
    assert table.nbytes <= 200_000


def test_equal_areas(table):
    assert np.allclose(table.d * table.y, table.v, rtol=1e-12)
    assert math.isclose(sp.ndtr(-table.x_N), table.v, rel_tol=1e-12)


def test_heights_are_density_at_edges(table):
    lo, hi = table.x[:-1], table.x[1:]
    pdf = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    assert np.allclose(table.y, np.maximum(pdf(lo), pdf(hi)), rtol=1e-14)
    assert np.allclose(table.ylow, np.minimum(pdf(lo), pdf(hi)), rtol=1e-14)


def test_edges_are_symmetric(table):
    e = table.edges
    assert e.size == 2 * table.N + 1
    assert np.array_equal(e, -e[::-1])


def test_index_brackets_a(table):
    rng = np.random.default_rng(0)
    for a in np.concatenate([rng.uniform(table.a_min, table.a_max, 2000),
                             [table.a_min, 0.0, table.a_max]]):
        i = table.index_of(a)
        assert table.edge(i) <= a + table.h
        # i_a sits at most one region below the one holding a
        assert a < table.edge(i + 2)


def test_index_outside_window(table):
    with pytest.raises(ValueError):
        table.index_of(table.a_max + 1.0)


def test_bytes_roundtrip(table, tmp_path):
    path = tmp_path / "t.bin"
    T.save_table(table, path)
    back = T.load_table(path)
    assert back.equals(table)
    assert T.to_bytes(back) == T.to_bytes(table)


def test_truncated_file_fails_checksum(table):
    raw = T.to_bytes(table)
    with pytest.raises(T.TableError, match="checksum"):
        T.from_bytes(raw[:-9])
    flipped = bytearray(raw)
    flipped[100] ^= 1
    with pytest.raises(T.TableError, match="checksum"):
        T.from_bytes(bytes(flipped))


def test_build_is_deterministic():
    assert T.to_bytes(T.build_regions(300)) == T.to_bytes(T.build_regions(300))


def test_tiny_table(tiny_table):
    tiny_table.validate()
    assert tiny_table.N == 20
    assert tiny_table.a_min < 0 < tiny_table.a_max


def test_table_for_ns_is_largest_fit():
    t = T.table_for_ns(1000)
    assert t.n_stored <= 1000
    assert T.build_regions(t.N + 1).n_stored > 1000


def test_validate_rejects_broken_area(tiny_table):
    bad = T.from_bytes(T.to_bytes(tiny_table), validate=False)
    bad.d = bad.d * 1.01
    with pytest.raises(T.TableError):
        bad.validate()


def test_json_export(tiny_table):
    import json
    doc = json.loads(T.to_json(tiny_table))
    assert doc["N"] == 20
    assert len(doc["x"]) == tiny_table.n_stored + 1
