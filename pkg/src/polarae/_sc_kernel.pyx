# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled successive-cancellation kernel.

Arithmetic mirrors polarae._sc_py.PyScKernel operation for operation so that
both backends produce bit-identical outputs under min-sum.
"""

from libc.math cimport fabs, log1p, exp, INFINITY

import numpy as np


cdef inline double _f_minsum(double a, double b) noexcept:
    cdef double v = fabs(a)
    cdef double w = fabs(b)
    if w < v:
        v = w
    if (a < 0) != (b < 0):
        v = -v
    return v


cdef inline double _f_exact(double a, double b) noexcept:
    cdef double aa = fabs(a)
    cdef double ab = fabs(b)
    cdef double v = aa if aa < ab else ab
    if (a < 0) != (b < 0):
        v = -v
    return v + log1p(exp(-(aa + ab))) - log1p(exp(-fabs(aa - ab)))


cdef class CyScKernel:
    """Per-decoder mutable scratch state; use one instance per worker."""

    cdef readonly int n, N
    cdef readonly object backend
    cdef bint exact_f
    cdef signed char[::1] frozen
    cdef double[::1] llr
    cdef unsigned char[::1] left
    cdef unsigned char[::1] cur
    cdef double[::1] perm
    cdef readonly object u_hat, x_raw, x_out
    cdef unsigned char[::1] u_view, xraw_view, xout_view

    def __init__(self, frozen_mask, exact_f=False):
        frozen = np.ascontiguousarray(frozen_mask, dtype=np.int8)
        N = len(frozen)
        n = N.bit_length() - 1
        if 1 << n != N:
            raise ValueError(f"length {N} is not a power of two")
        self.n = n
        self.N = N
        self.backend = "cython"
        self.exact_f = bool(exact_f)
        self.frozen = frozen
        self.llr = np.zeros(2 * N - 1)
        self.left = np.zeros(N - 1 if N > 1 else 1, dtype=np.uint8)
        self.cur = np.zeros(N, dtype=np.uint8)
        self.perm = np.zeros(N)
        self.u_hat = np.zeros(N, dtype=np.uint8)
        self.x_raw = np.zeros(N, dtype=np.uint8)
        self.x_out = np.zeros(N, dtype=np.uint8)
        self.u_view = self.u_hat
        self.xraw_view = self.x_raw
        self.xout_view = self.x_out

    cdef tuple _decode_impl(self, double abort_threshold, long stop_after_leaf):
        cdef int n = self.n
        cdef int N = self.N
        cdef double[::1] llr = self.llr
        cdef unsigned char[::1] left = self.left
        cdef unsigned char[::1] cur = self.cur
        cdef signed char[::1] frozen = self.frozen
        cdef unsigned char[::1] u_hat = self.u_view
        cdef double pm = 0.0
        cdef long fg = 0
        cdef int k, j, jmax, t, half, base, parent, size
        cdef double a, b, leaf_llr
        cdef unsigned char u
        cdef bint exact = self.exact_f

        for k in range(N):
            if k == 0:
                jmax = n - 1
            else:
                jmax = 0
                while not (k >> jmax) & 1:
                    jmax += 1
            for j in range(jmax, -1, -1):
                half = 1 << j
                base = half - 1
                parent = 2 * half - 1
                if (k >> j) & 1:
                    for t in range(half):
                        a = llr[parent + t]
                        b = llr[parent + half + t]
                        llr[base + t] = b - a if left[base + t] else b + a
                elif exact:
                    for t in range(half):
                        llr[base + t] = _f_exact(llr[parent + t], llr[parent + half + t])
                else:
                    for t in range(half):
                        llr[base + t] = _f_minsum(llr[parent + t], llr[parent + half + t])
                fg += half
            leaf_llr = llr[0]
            u = 0
            if frozen[k]:
                if leaf_llr < 0.0:
                    pm -= leaf_llr
                    if pm >= abort_threshold:
                        return pm, True, k, fg
            elif leaf_llr < 0.0:
                u = 1
            u_hat[k] = u
            if k == stop_after_leaf:
                return pm, True, k, fg
            cur[0] = u
            size = 1
            j = 0
            while j < n and (k >> j) & 1:
                base = size - 1
                for t in range(size):
                    cur[size + t] = cur[t]
                    cur[t] = cur[t] ^ left[base + t]
                size = size * 2
                j += 1
            if j < n:
                base = size - 1
                for t in range(size):
                    left[base + t] = cur[t]
            else:
                for t in range(N):
                    self.xraw_view[t] = cur[t]
        return pm, False, -1, fg

    def decode(self, llr, double abort_threshold=INFINITY, long stop_after_leaf=-1):
        """Run SC over the channel LLRs; see PyScKernel.decode for the contract."""
        cdef double[::1] src = np.ascontiguousarray(llr, dtype=np.float64)
        if src.shape[0] != self.N:
            raise ValueError(f"LLR length {src.shape[0]} != N={self.N}")
        cdef int t
        for t in range(self.N):
            self.llr[self.N - 1 + t] = src[t]
        return self._decode_impl(abort_threshold, stop_after_leaf)

    def decode_permuted(self, llr, table, double abort_threshold=INFINITY):
        """Scatter llr through the permutation table, decode, and gather the
        codeword estimate back into the original coordinate order (x_out)."""
        cdef double[::1] src = llr
        cdef int[::1] tab = table
        cdef int N = self.N
        cdef int t
        for t in range(N):
            self.perm[tab[t]] = src[t]
        for t in range(N):
            self.llr[N - 1 + t] = self.perm[t]
        res = self._decode_impl(abort_threshold, -1)
        if not res[1]:
            for t in range(N):
                self.xout_view[t] = self.xraw_view[tab[t]]
        return res

    def xout_equals(self, ref):
        cdef unsigned char[::1] r = ref
        cdef int t
        for t in range(self.N):
            if self.xout_view[t] != r[t]:
                return False
        return True
