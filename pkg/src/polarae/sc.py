"""Successive-cancellation decoding over LLRs with path-metric tracking.

The hot kernel has two interchangeable implementations: a compiled extension
(polarae._sc_kernel, built from Cython) and a pure-Python fallback
(polarae._sc_py).  The compiled one is preferred at import time; both produce
bit-identical results under the default min-sum arithmetic.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from ._sc_py import PyScKernel
from .codes import CodeSpec, polar_transform

try:
    from ._sc_kernel import CyScKernel
except ImportError:  # pragma: no cover - exercised only without the extension
    CyScKernel = None

_INF = math.inf


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if CyScKernel is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get("POLARAE_BACKEND", "").strip().lower()
    if forced:
        if forced not in ("cython", "python"):
            raise ValueError(f"POLARAE_BACKEND must be 'cython' or 'python', got {forced!r}")
        if forced == "cython" and CyScKernel is None:
            raise ImportError("POLARAE_BACKEND=cython but the compiled kernel is unavailable")
        return forced
    return available_backends()[0]


def make_kernel(frozen_mask, backend: str = "auto", exact_f: bool = False):
    if backend == "auto":
        backend = default_backend()
    if backend == "cython":
        if CyScKernel is None:
            raise ImportError("compiled kernel unavailable; build the extension or use backend='python'")
        return CyScKernel(np.asarray(frozen_mask, dtype=np.int8), exact_f)
    if backend == "python":
        return PyScKernel(frozen_mask, exact_f)
    raise ValueError(f"unknown backend {backend!r}")


def fg_fraction(k: int, n: int) -> float:
    """Fraction of f/g evaluations a decode stopped after leaf k has performed,
    relative to a full length-2^n decode."""
    N = 1 << n
    if not 0 <= k < N:
        raise ValueError(f"leaf index {k} outside [0, {N})")
    total = sum(-((k + 1) // -(1 << s)) * (1 << s) for s in range(n))
    return total / (n * N)


@dataclass
class ScOutcome:
    """Result of one SC attempt.

    For aborted attempts u_hat/x_hat are None and complexity_fraction is the
    f/g-evaluation fraction up to the abort leaf; otherwise x_hat is the
    re-encoded estimate and complexity_fraction is 1.
    """

    u_hat: np.ndarray | None
    x_hat: np.ndarray | None
    pm: float
    aborted: bool
    abort_leaf: int | None
    complexity_fraction: float


class ScDecoder:
    """SC decoder bound to one code; holds mutable scratch, one per worker."""

    def __init__(self, code: CodeSpec, backend: str = "auto", exact_f: bool = False):
        self.code = code
        self.kernel = make_kernel(code.frozen_mask, backend=backend, exact_f=exact_f)
        self.backend = self.kernel.backend

    def decode(self, llr, abort_threshold: float | None = None) -> ScOutcome:
        llr = np.asarray(llr, dtype=np.float64)
        if len(llr) != self.code.N:
            raise ValueError(f"LLR length {len(llr)} != N={self.code.N}")
        thr = _INF if abort_threshold is None else float(abort_threshold)
        if thr < 0:
            raise ValueError("abort threshold must be nonnegative")
        pm, aborted, abort_leaf, _ = self.kernel.decode(llr, thr)
        if aborted:
            frac = fg_fraction(abort_leaf, self.code.n)
            return ScOutcome(None, None, pm, True, abort_leaf, frac)
        return ScOutcome(
            self.kernel.u_hat.copy(), self.kernel.x_raw.copy(), pm, False, None, 1.0
        )


def sc_decode(llr, code: CodeSpec, abort_threshold: float | None = None,
              backend: str = "auto") -> ScOutcome:
    """One-shot convenience wrapper; hot loops should hold an ScDecoder."""
    return ScDecoder(code, backend=backend).decode(llr, abort_threshold)


def u_from_codeword(x_hat: np.ndarray) -> np.ndarray:
    """Input vector whose encoding equals x_hat (the transform is an involution)."""
    return polar_transform(x_hat)
