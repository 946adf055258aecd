import io

import numpy as np
import pytest

from tensorlab import f2
from tensorlab.core import F2Code, GroupElement, act, decode, encode
from tensorlab.f2 import (CodeLinearMap, build_link_array, census_generators,
                          gl3_f2_elements, oracle_rank, oracle_rank_table,
                          random_invertible_f2, simple_tensor_codes,
                          spin_orbit)


class TestGL3:
    def test_order(self):
        assert len(gl3_f2_elements()) == 168

    def test_contains_identity(self):
        assert any(np.array_equal(M, np.eye(3, dtype=np.uint8))
                   for M in gl3_f2_elements())

    def test_all_unimodular(self):
        for M in gl3_f2_elements():
            assert round(np.linalg.det(M.astype(float))) % 2 == 1

    def test_all_distinct(self):
        keys = {M.tobytes() for M in gl3_f2_elements()}
        assert len(keys) == 168

    def test_gl2_order(self):
        assert len(f2.gl_f2_elements(2)) == 6


class TestCodeMaps:
    def test_map_agrees_with_act(self):
        rng = np.random.default_rng(0)
        dims = (3, 3, 3)
        for _ in range(10):
            g = GroupElement(tuple(random_invertible_f2(rng, 3) for _ in range(3)),
                             f2=True)
            m = CodeLinearMap.from_group_element(g, dims)
            for code in rng.integers(1, 2 ** 27, size=20):
                direct = encode(act(decode(F2Code(int(code), dims)), g)).bits
                assert m.apply_one(int(code)) == direct

    def test_permutation_map(self):
        dims = (3, 3, 3)
        m = CodeLinearMap.from_permutation((2, 0, 1), dims)
        rng = np.random.default_rng(1)
        for code in rng.integers(1, 2 ** 27, size=20):
            t = decode(F2Code(int(code), dims))
            direct = encode(type(t)(np.transpose(t.data, (2, 0, 1)), f2=True)).bits
            assert m.apply_one(int(code)) == direct

    def test_permutation_must_preserve_dims(self):
        with pytest.raises(ValueError):
            CodeLinearMap.from_permutation((2, 0, 1), (3, 3, 2))


class TestSimpleTensors:
    def test_count_333(self):
        assert simple_tensor_codes((3, 3, 3)).size == 343

    def test_count_222(self):
        assert simple_tensor_codes((2, 2, 2)).size == 27

    def test_all_rank_one(self, census222):
        for code in simple_tensor_codes((2, 2, 2)):
            assert census222.rank_of(int(code)) == 1


class TestSpinOrbit:
    def test_identity_generators_fix_everything(self):
        orbit = spin_orbit(5, [], (2, 2, 2))
        assert list(orbit) == [5]

    def test_orbit_matches_census(self, census222):
        gens = census_generators((2, 2, 2))
        for rec in census222.orbits:
            orbit = spin_orbit(rec.canonical_code, gens, (2, 2, 2))
            assert orbit.size == rec.size
            assert int(orbit.min()) == rec.canonical_code
            assert np.all(census222.orbit_id[orbit] == rec.index)


class TestCensus222:
    def test_partition(self, census222):
        assert sum(r.size for r in census222.orbits) == 255
        counts = np.bincount(census222.orbit_id, minlength=len(census222.orbits) + 1)
        assert counts[0] == 1  # only the zero code is unassigned
        for rec in census222.orbits:
            assert counts[rec.index] == rec.size

    def test_lagrange(self, census222):
        group_order = 6 ** 3
        for rec in census222.orbits:
            assert group_order % rec.size == 0
        for s in census222.large_orbits:
            assert (6 * group_order) % s.size == 0

    def test_orbit_ids_ascend_with_canonicals(self, census222):
        canons = [r.canonical_code for r in census222.orbits]
        assert canons == sorted(canons)

    def test_max_rank_three(self, census222):
        assert max(r.rank for r in census222.orbits) == 3

    def test_oracle_equivalence(self, census222):
        oracle = oracle_rank_table((2, 2, 2))
        for code in range(1, 256):
            assert census222.rank_of(code) == int(oracle[code])

    def test_rank_invariance_under_action(self, census222):
        rng = np.random.default_rng(2)
        dims = (2, 2, 2)
        for _ in range(100):
            code = int(rng.integers(1, 256))
            g = GroupElement(tuple(random_invertible_f2(rng, 2) for _ in range(3)),
                             f2=True)
            image = encode(act(decode(F2Code(code, dims)), g)).bits
            assert census222.rank_of(code) == census222.rank_of(image)

    def test_subadditivity(self, census222):
        rng = np.random.default_rng(3)
        for _ in range(100):
            x, y = rng.integers(1, 256, size=2)
            x, y = int(x), int(y)
            if x ^ y == 0:
                continue
            assert (census222.rank_of(x ^ y)
                    <= census222.rank_of(x) + census222.rank_of(y))


class TestLinkArray:
    def test_cycles(self, census222):
        link = census222.link
        for rec in census222.orbits:
            seen = set()
            code = rec.canonical_code
            for _ in range(rec.size):
                assert code not in seen
                seen.add(code)
                assert census222.orbit_id[link[code]] == rec.index
                code = int(link[code])
            assert code == rec.canonical_code

    def test_links_ascend_until_wrap(self, census222):
        link = census222.link
        for rec in census222.orbits:
            code = rec.canonical_code
            for _ in range(rec.size - 1):
                assert int(link[code]) > code
                code = int(link[code])
            assert int(link[code]) == rec.canonical_code

    def test_singleton_format_wraps_to_itself(self):
        tables = f2.full_census((1, 1, 1))
        assert len(tables.orbits) == 1
        assert int(tables.link[1]) == 1
        assert tables.rank_of(1) == 1


class TestOracle:
    def test_zero(self):
        assert oracle_rank(0, (2, 2, 2)) == 0

    def test_simple_tensor(self):
        code = int(simple_tensor_codes((2, 2, 2))[0])
        assert oracle_rank(code, (2, 2, 2)) == 1

    def test_identity_shift_pair_has_rank_three(self):
        # slices (identity, shift): x111 = x221 = x122 = 1
        data = np.zeros((2, 2, 2), np.uint8)
        data[0, 0, 0] = 1
        data[1, 1, 0] = 1
        data[0, 1, 1] = 1
        code = encode(f2_tensor(data)).bits
        assert code == 146
        assert oracle_rank(code, (2, 2, 2)) == 3

    def test_large_formats_rejected(self):
        with pytest.raises(ValueError):
            oracle_rank_table((3, 3, 3))

    def test_223_format(self):
        table = oracle_rank_table((2, 2, 3))
        assert int(table[0]) == 0
        assert int(table.max()) <= 6
        # every simple tensor sits at distance one
        for code in simple_tensor_codes((2, 2, 3)):
            assert int(table[code]) == 1


def f2_tensor(data):
    from tensorlab.core import DenseTensor
    return DenseTensor(np.asarray(data, np.uint8), f2=True)


class TestMergeAndTable:
    def test_merge_collects_whole_ranks(self, census222):
        for s in census222.large_orbits:
            ranks = {census222.orbits[i - 1].rank for i in s.small_indices}
            assert len(ranks) == 1
            assert sum(census222.orbits[i - 1].size for i in s.small_indices) == s.size

    def test_large_indices_cover_all_orbits(self, census222):
        assert all(r.large_index > 0 for r in census222.orbits)

    def test_table_is_deterministic(self, census222):
        out1, out2 = io.StringIO(), io.StringIO()
        f2.emit_table(census222, out1, "dots")
        f2.emit_table(census222, out2, "dots")
        assert out1.getvalue() == out2.getvalue()

    def test_tsv_and_dots_agree_on_content(self, census222):
        dots, tsv = io.StringIO(), io.StringIO()
        f2.emit_table(census222, dots, "dots")
        f2.emit_table(census222, tsv, "tsv")
        a = [line.split() for line in dots.getvalue().splitlines() if line]
        b = [line.split("\t") for line in tsv.getvalue().splitlines() if line]
        assert a == b

    def test_summary_percentages_total(self, census222):
        summary = f2.census_summary(census222)
        assert sum(summary["tensors"]) == 256
        assert sum(summary["small"]) == len(census222.orbits) + 1


class TestCacheFile:
    def test_roundtrip(self, census222, tmp_path):
        path = tmp_path / "c.bin"
        f2.save_census(census222, path)
        again = f2.load_census(path)
        assert again.dims == census222.dims
        assert np.array_equal(again.orbit_id, census222.orbit_id)
        assert np.array_equal(again.rank, census222.rank)
        got = [(r.index, r.canonical_code, r.size, r.rank, r.large_index)
               for r in again.orbits]
        want = [(r.index, r.canonical_code, r.size, r.rank, r.large_index)
                for r in census222.orbits]
        assert got == want
        lg = [(s.index, s.rank, s.size, s.canonical_code, s.small_indices)
              for s in again.large_orbits]
        lw = [(s.index, s.rank, s.size, s.canonical_code, s.small_indices)
              for s in census222.large_orbits]
        assert lg == lw

    def test_header_layout(self, census222, tmp_path):
        path = tmp_path / "c.bin"
        f2.save_census(census222, path)
        blob = path.read_bytes()
        assert blob[:8] == b"F2CENSUS"
        assert int.from_bytes(blob[8:10], "little") == 1
        assert tuple(blob[10:13]) == (2, 2, 2)
        n_records = len(census222.orbits)
        assert len(blob) == 13 + 2 * 255 + 13 * n_records

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTACENSUS")
        with pytest.raises(f2.CensusError):
            f2.load_census(path)


class TestLowMemory:
    def test_low_memory_matches_default(self):
        full = f2.full_census((2, 2, 2))
        slim = f2.full_census((2, 2, 2), low_memory=True)
        assert slim.link is None
        assert np.array_equal(full.orbit_id, slim.orbit_id)
        assert np.array_equal(full.rank, slim.rank)
        assert [(r.canonical_code, r.size, r.rank, r.large_index) for r in full.orbits] \
            == [(r.canonical_code, r.size, r.rank, r.large_index) for r in slim.orbits]
