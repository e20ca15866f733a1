import math

import numpy as np
import pytest

from polarae.codes import CodeSpec, embed_message, encode
from polarae.sc import (
    ScDecoder,
    available_backends,
    fg_fraction,
    make_kernel,
    sc_decode,
)

BACKENDS = available_backends()
needs_ext = pytest.mark.skipif(
    "cython" not in BACKENDS, reason="compiled kernel not built"
)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


class TestScDecode:
    def test_hand_traced_two_level_recursion(self, backend):
        # Two-stage butterfly traced by hand: leaf LLRs are (-1, 0, -1, -3),
        # the only frozen violation is leaf 0 with |L|=1.
        code = CodeSpec(n=2, info_set=(2, 3))
        out = sc_decode([1.0, -2.0, 1.0, 1.0], code, backend=backend)
        assert list(out.u_hat) == [0, 0, 1, 1]
        assert list(out.x_hat) == [0, 1, 0, 1]
        assert out.pm == 1.0
        assert not out.aborted and out.complexity_fraction == 1.0

    def test_all_positive_llrs(self, backend, rm16):
        out = sc_decode(np.full(16, 3.0), rm16, backend=backend)
        assert out.pm == 0.0 and not out.x_hat.any() and not out.aborted

    def test_noiseless_codeword_recovered_with_zero_pm(self, backend, rm16, rng):
        for _ in range(20):
            m = rng.integers(0, 2, size=rm16.K, dtype=np.uint8)
            x = encode(embed_message(m, rm16), rm16)
            out = sc_decode(7.5 * (1.0 - 2.0 * x), rm16, backend=backend)
            assert np.array_equal(out.x_hat, x) and out.pm == 0.0

    def test_zero_threshold_aborts_at_first_violated_frozen_leaf(self, backend):
        code = CodeSpec(n=2, info_set=(2, 3))
        out = sc_decode([1.0, -2.0, 1.0, 1.0], code, abort_threshold=0.0, backend=backend)
        assert out.aborted and out.abort_leaf == 0
        assert out.pm == 1.0
        assert out.complexity_fraction == fg_fraction(0, 2)
        assert out.u_hat is None and out.x_hat is None

    def test_zero_threshold_without_violation_completes(self, backend, rm16):
        out = sc_decode(np.full(16, 2.0), rm16, abort_threshold=0.0, backend=backend)
        assert not out.aborted

    def test_infinite_threshold_equals_no_threshold(self, backend, rm128, rng):
        dec = ScDecoder(rm128, backend=backend)
        for _ in range(25):
            llr = rng.normal(size=128) * 2
            a = dec.decode(llr)
            b = dec.decode(llr, abort_threshold=math.inf)
            assert np.array_equal(a.u_hat, b.u_hat)
            assert np.array_equal(a.x_hat, b.x_hat)
            assert a.pm == b.pm and a.aborted == b.aborted

    def test_pm_nondecreasing_over_leaves(self, backend, rm16, rng):
        kern = make_kernel(rm16.frozen_mask, backend=backend)
        for _ in range(10):
            llr = rng.normal(size=16) * 1.5
            pms = [kern.decode(llr, math.inf, k)[0] for k in range(16)]
            assert all(b >= a for a, b in zip(pms, pms[1:]))

    def test_length_mismatch(self, backend, rm16):
        with pytest.raises(ValueError):
            sc_decode(np.ones(8), rm16, backend=backend)

    def test_negative_threshold_rejected(self, rm16):
        with pytest.raises(ValueError):
            sc_decode(np.ones(16), rm16, abort_threshold=-1.0)

    def test_tie_llr_zero_counts_as_frozen_agreement(self, backend):
        code = CodeSpec(n=1, info_set=(1,))
        out = sc_decode([1.0, -1.0], code, backend=backend)
        # f(1,-1) = -1 penalizes leaf 0; g gives 0 at leaf 1 -> decision 0
        assert out.pm == 1.0 and out.u_hat[1] == 0


@needs_ext
class TestKernelParity:
    def test_bit_identical_decodes(self, rm128, rng):
        d_cy = ScDecoder(rm128, backend="cython")
        d_py = ScDecoder(rm128, backend="python")
        for _ in range(120):
            llr = rng.normal(loc=0.4, size=128) * 3
            a, b = d_cy.decode(llr), d_py.decode(llr)
            assert a.pm == b.pm
            assert np.array_equal(a.u_hat, b.u_hat)
            assert np.array_equal(a.x_hat, b.x_hat)

    def test_identical_aborts_and_counts(self, rm128, rng):
        k_cy = make_kernel(rm128.frozen_mask, backend="cython")
        k_py = make_kernel(rm128.frozen_mask, backend="python")
        for _ in range(120):
            llr = rng.normal(size=128) * 2
            thr = float(rng.uniform(0, 8))
            ra = k_cy.decode(llr, thr)
            rb = k_py.decode(llr, thr)
            assert ra == rb

    def test_identical_permuted_decodes(self, rm128, rng):
        k_cy = make_kernel(rm128.frozen_mask, backend="cython")
        k_py = make_kernel(rm128.frozen_mask, backend="python")
        for _ in range(40):
            llr = np.ascontiguousarray(rng.normal(size=128) * 2)
            tab = np.ascontiguousarray(rng.permutation(128), dtype=np.int32)
            ra = k_cy.decode_permuted(llr, tab)
            rb = k_py.decode_permuted(llr, tab)
            assert ra == rb
            assert np.array_equal(k_cy.x_out, k_py.x_out)


class TestFgFraction:
    @pytest.mark.parametrize("n", range(1, 11))
    def test_last_leaf_is_exactly_one(self, n):
        assert fg_fraction((1 << n) - 1, n) == 1.0

    def test_first_leaf_n7(self):
        assert fg_fraction(0, 7) == 127 / 896

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            fg_fraction(128, 7)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_matches_instrumented_counts(self, n, backend, rng):
        N = 1 << n
        frozen = np.zeros(N, dtype=np.int8)
        frozen[: N // 2] = 1
        kern = make_kernel(frozen, backend=backend)
        for k in range(N):
            llr = rng.normal(size=N)
            pm, aborted, leaf, fg = kern.decode(llr, math.inf, k)
            assert aborted and leaf == k
            assert fg == fg_fraction(k, n) * n * N

    def test_monotone_spot_pair_via_instrumented_counts(self, rng):
        frozen = np.zeros(128, dtype=np.int8)
        kern = make_kernel(frozen, backend=BACKENDS[0])
        llr = rng.normal(size=128)
        fg5 = kern.decode(llr, math.inf, 5)[3]
        fg6 = kern.decode(llr, math.inf, 6)[3]
        assert fg5 < fg6
        assert fg_fraction(5, 7) < fg_fraction(6, 7)


class TestExactF:
    def test_runs_and_agrees_at_high_snr(self, rm16, rng):
        for be in BACKENDS:
            d_min = ScDecoder(rm16, backend=be)
            d_ex = ScDecoder(rm16, backend=be, exact_f=True)
            agree = 0
            for _ in range(30):
                m = rng.integers(0, 2, size=rm16.K, dtype=np.uint8)
                x = encode(embed_message(m, rm16), rm16)
                llr = 9.0 * (1.0 - 2.0 * x) + rng.normal(size=16)
                agree += np.array_equal(d_min.decode(llr).x_hat, d_ex.decode(llr).x_hat)
            assert agree >= 28

    @needs_ext
    def test_backends_close(self, rm16, rng):
        d_cy = ScDecoder(rm16, backend="cython", exact_f=True)
        d_py = ScDecoder(rm16, backend="python", exact_f=True)
        for _ in range(40):
            llr = rng.normal(size=16) * 2
            a, b = d_cy.decode(llr), d_py.decode(llr)
            assert np.array_equal(a.u_hat, b.u_hat)
            assert a.pm == pytest.approx(b.pm, rel=1e-12, abs=1e-12)
