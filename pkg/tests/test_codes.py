import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarae.codes import (
    CodeSpec,
    ConstructionError,
    blta_symmetric_info_set,
    check_upo_closed,
    embed_message,
    encode,
    is_codeword,
    load_info_set,
    polar_info_set,
    polar_transform,
    rm_info_set,
    save_info_set,
    upo_leq,
)


def brute_force_rm(n, r):
    return tuple(k for k in range(1 << n) if bin(k).count("1") >= n - r)


class TestRmInfoSet:
    def test_rm_7_3_has_dimension_64(self):
        assert len(rm_info_set(7, 3)) == 64

    def test_r_equals_n_keeps_everything(self):
        assert rm_info_set(3, 3) == tuple(range(8))

    def test_small_example_by_enumeration(self):
        assert rm_info_set(3, 1) == (3, 5, 6, 7)
        assert rm_info_set(3, 1) == brute_force_rm(3, 1)

    @pytest.mark.parametrize("n,r", [(4, 2), (5, 3), (6, 1), (7, 4)])
    def test_matches_popcount_enumeration(self, n, r):
        assert rm_info_set(n, r) == brute_force_rm(n, r)

    @pytest.mark.parametrize("n", [3, 5, 7])
    def test_nested_in_r(self, n):
        for r in range(n):
            assert set(rm_info_set(n, r)) < set(rm_info_set(n, r + 1))

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            rm_info_set(3, 4)
        with pytest.raises(ValueError):
            rm_info_set(0, 0)
        with pytest.raises(ValueError):
            rm_info_set(3, -1)


def bitwise_dominates(j, k):
    return (j & k) == k


class TestPolarInfoSet:
    def test_degenerate_sizes(self):
        assert polar_info_set(5, 0, 2.0) == ()
        assert polar_info_set(3, 8, 2.0) == tuple(range(8))

    def test_ga_set_respects_bitwise_dominance(self):
        info = set(polar_info_set(7, 60, 2.0))
        frozen = [k for k in range(128) if k not in info]
        for k in info:
            for j in frozen:
                assert not bitwise_dominates(j, k), (k, j)

    def test_size_and_range(self):
        info = polar_info_set(6, 30, 1.0)
        assert len(info) == 30 and all(0 <= k < 64 for k in info)

    def test_upo_checker_rejects_bad_set(self):
        with pytest.raises(ConstructionError):
            check_upo_closed((0,), 2)  # index 0 in, its dominators out


class TestUpoOrder:
    def test_generators(self):
        assert upo_leq(0b0101, 0b1101)  # bitwise domination
        assert upo_leq(0b0011, 0b0101)  # swap a one upward
        assert not upo_leq(0b0101, 0b0011)

    @given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
    @settings(max_examples=200, deadline=None)
    def test_partial_order_axioms(self, a, b, c):
        assert upo_leq(a, a)
        if upo_leq(a, b) and upo_leq(b, a):
            assert a == b
        if upo_leq(a, b) and upo_leq(b, c):
            assert upo_leq(a, c)


class TestCodeSpec:
    def test_partition_invariant(self, rm16):
        assert sorted(rm16.info_set + rm16.frozen_set) == list(range(16))
        assert rm16.K == len(rm16.info_set) == 11

    def test_duplicate_index_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            CodeSpec(n=3, info_set=(1, 1, 2))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            CodeSpec(n=3, info_set=(8,))


class TestInfoSetFiles:
    def test_rate_one_roundtrip(self, tmp_path):
        path = tmp_path / "rate1.txt"
        path.write_text("8 8\n0 1 2 3 4 5 6 7\n")
        code = load_info_set(path)
        assert code.K == 8 and code.N == 8 and code.frozen_set == ()

    def test_duplicate_in_file_rejected(self, tmp_path):
        path = tmp_path / "dup.txt"
        path.write_text("8 3\n1 1 2\n")
        with pytest.raises(ValueError):
            load_info_set(path)

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("8 3\n1 2\n")
        with pytest.raises(ValueError):
            load_info_set(path)

    def test_rm_roundtrip_produces_same_set(self, tmp_path, rm128):
        path = tmp_path / "rm.txt"
        save_info_set(rm128, path)
        assert load_info_set(path).info_set == rm_info_set(7, 3)


def materialize_generator(n):
    g = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    out = np.array([[1]], dtype=np.uint8)
    for _ in range(n):
        out = np.kron(out, g)
    return out


class TestEncode:
    def test_all_zero(self, rm16):
        assert not encode(np.zeros(16, dtype=np.uint8), rm16).any()

    def test_kernel_rows(self):
        code = CodeSpec(n=1, info_set=(0, 1))
        assert list(encode(np.array([0, 1]), code)) == [0, 1]
        assert list(encode(np.array([1, 0]), code)) == [1, 1]

    def test_matches_materialized_generator(self, rng):
        g16 = materialize_generator(4)
        for _ in range(50):
            u = rng.integers(0, 2, size=16, dtype=np.uint8)
            assert np.array_equal(polar_transform(u), u @ g16 % 2)

    def test_nonzero_frozen_rejected(self, rm16):
        u = np.zeros(16, dtype=np.uint8)
        u[rm16.frozen_set[0]] = 1
        with pytest.raises(ValueError, match="frozen"):
            encode(u, rm16)

    @given(st.integers(0, 2**16 - 1), st.integers(0, 2**16 - 1))
    @settings(max_examples=100, deadline=None)
    def test_linearity(self, a, b):
        ua = np.array([(a >> i) & 1 for i in range(16)], dtype=np.uint8)
        ub = np.array([(b >> i) & 1 for i in range(16)], dtype=np.uint8)
        lhs = polar_transform(ua ^ ub)
        rhs = polar_transform(ua) ^ polar_transform(ub)
        assert np.array_equal(lhs, rhs)

    @given(st.integers(0, 2**16 - 1))
    @settings(max_examples=100, deadline=None)
    def test_involution(self, a):
        u = np.array([(a >> i) & 1 for i in range(16)], dtype=np.uint8)
        assert np.array_equal(polar_transform(polar_transform(u)), u)

    def test_is_codeword(self, rm16, rng):
        m = rng.integers(0, 2, size=rm16.K, dtype=np.uint8)
        x = encode(embed_message(m, rm16), rm16)
        assert is_codeword(x, rm16)
        x[0] ^= 1
        # one flip of a minimum-distance-4 code cannot stay a codeword
        assert not is_codeword(x, rm16)


class TestBlockSymmetricSets:
    @pytest.mark.parametrize("K", [23, 60, 98])
    def test_exact_dimension_and_upo(self, K):
        info = blta_symmetric_info_set(7, K, [3, 4], design_snr_db=2.0)
        assert len(info) == K
        check_upo_closed(info, 7)

    def test_within_block_permutation_invariance(self, rng):
        info = set(blta_symmetric_info_set(7, 60, [3, 4], design_snr_db=2.0))
        for _ in range(20):
            pa = rng.permutation(3)
            pb = 3 + rng.permutation(4)
            order = np.concatenate([pa, pb])
            mapped = {
                sum(((k >> b) & 1) << order[b] for b in range(7)) for k in info
            }
            assert mapped == info

    def test_infeasible_dimension_raises(self):
        # sizes of within-block orbits for ([7]) are binomials of 7; K=2 is
        # not reachable as an upward-closed union
        with pytest.raises(ConstructionError):
            blta_symmetric_info_set(7, 2, [7], design_snr_db=2.0)
