"""Pure-Python successive-cancellation kernel.

Fallback for the compiled extension in _sc_kernel.pyx.  Both kernels implement
the identical arithmetic (min-sum f, g, path-metric accumulation in ascending
leaf order), so their outputs agree bit for bit and tests can compare them
directly.
"""

import math

import numpy as np

_INF = math.inf


class PyScKernel:
    """Per-decoder mutable scratch state; use one instance per worker."""

    backend = "python"

    def __init__(self, frozen_mask, exact_f: bool = False):
        frozen = np.asarray(frozen_mask, dtype=np.int8)
        N = len(frozen)
        n = N.bit_length() - 1
        if 1 << n != N:
            raise ValueError(f"length {N} is not a power of two")
        self.n = n
        self.N = N
        self.exact_f = bool(exact_f)
        self.frozen = frozen
        # Level s of the LLR tree lives at offset 2^s - 1 with length 2^s;
        # level n holds the channel LLRs.  left holds the re-encoded left-child
        # bits per level with the same layout (levels 0..n-1).
        self._llr = np.zeros(2 * N - 1)
        self._left = np.zeros(N - 1, dtype=np.uint8)
        self._cur = np.zeros(N, dtype=np.uint8)
        self.u_hat = np.zeros(N, dtype=np.uint8)
        self.x_raw = np.zeros(N, dtype=np.uint8)
        self.x_out = np.zeros(N, dtype=np.uint8)
        self._perm_llr = np.zeros(N)

    def _compute_level(self, j: int, k: int) -> None:
        half = 1 << j
        base = half - 1
        parent = 2 * half - 1
        a = self._llr[parent : parent + half]
        b = self._llr[parent + half : parent + 2 * half]
        out = self._llr[base : base + half]
        if (k >> j) & 1:
            ub = self._left[base : base + half]
            np.multiply(a, 1.0 - 2.0 * ub, out=out)
            out += b
        elif self.exact_f:
            np.copyto(out, _boxplus(a, b))
        else:
            np.minimum(np.abs(a), np.abs(b), out=out)
            np.negative(out, out=out, where=(a < 0) != (b < 0))

    def decode(self, llr, abort_threshold=_INF, stop_after_leaf=-1):
        """Run SC over the channel LLRs.

        Returns (pm, aborted, abort_leaf, fg_count).  When aborted, x_raw and
        x_out are not meaningful.  fg_count is the number of scalar f/g
        evaluations performed, incremented as each level vector is produced.
        """
        n, N = self.n, self.N
        llr = np.asarray(llr, dtype=np.float64)
        if len(llr) != N:
            raise ValueError(f"LLR length {len(llr)} != N={N}")
        self._llr[N - 1 :] = llr
        frozen = self.frozen
        u_hat = self.u_hat
        left = self._left
        cur = self._cur
        pm = 0.0
        fg = 0
        for k in range(N):
            jmax = n - 1 if k == 0 else (k & -k).bit_length() - 1
            for j in range(jmax, -1, -1):
                self._compute_level(j, k)
                fg += 1 << j
            leaf_llr = self._llr[0]
            if frozen[k]:
                u = 0
                if leaf_llr < 0.0:
                    pm -= leaf_llr
                    if pm >= abort_threshold:
                        return pm, True, k, fg
            else:
                u = 1 if leaf_llr < 0.0 else 0
            u_hat[k] = u
            if k == stop_after_leaf:
                return pm, True, k, fg
            # Propagate partial sums upward while this leaf closes right children.
            cur[0] = u
            size = 1
            j = 0
            while j < n and (k >> j) & 1:
                base = size - 1
                cur[size : 2 * size] = cur[:size]
                cur[:size] ^= left[base : base + size]
                size *= 2
                j += 1
            if j < n:
                base = size - 1
                left[base : base + size] = cur[:size]
            else:
                self.x_raw[:] = cur
        return pm, False, -1, fg

    def decode_permuted(self, llr, table, abort_threshold=_INF):
        """Scatter llr through the permutation table, decode, and gather the
        codeword estimate back into the original coordinate order (x_out)."""
        self._perm_llr[table] = llr
        pm, aborted, abort_leaf, fg = self.decode(self._perm_llr, abort_threshold)
        if not aborted:
            np.take(self.x_raw, table, out=self.x_out)
        return pm, aborted, abort_leaf, fg

    def xout_equals(self, ref) -> bool:
        return bool(np.array_equal(self.x_out, ref))


def _boxplus(a, b):
    """Exact LLR check-node combination in a numerically stable form."""
    sign = np.where((a < 0) != (b < 0), -1.0, 1.0)
    aa, ab = np.abs(a), np.abs(b)
    v = sign * np.minimum(aa, ab)
    return v + np.log1p(np.exp(-(aa + ab))) - np.log1p(np.exp(-np.abs(aa - ab)))
