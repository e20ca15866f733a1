"""Automorphism-ensemble SC decoding: plain, sequential with early stopping,
and sequential with mid-decode abort, plus the metrics and oracle statistics
used to study them."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .autos import AffinePerm
from .codes import CodeSpec
from .sc import ScOutcome, fg_fraction, make_kernel, u_from_codeword

_INF = math.inf


@dataclass
class SigmaParams:
    """Per-step stopping thresholds; the decoder always stops at step M, so the
    last entry is +inf by construction."""

    sigma: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=np.float64)
        if s.ndim != 1 or len(s) < 1:
            raise ValueError("sigma must be a 1-D vector")
        if np.any(s < 0):
            raise ValueError("thresholds must be nonnegative")
        if not math.isinf(s[-1]):
            raise ValueError("the last threshold must be +inf")
        self.sigma = s

    @property
    def M(self) -> int:
        return len(self.sigma)

    def to_json(self) -> str:
        payload = dict(self.provenance)
        payload["M"] = self.M
        payload["sigma"] = ["inf" if math.isinf(v) else v for v in self.sigma]
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SigmaParams":
        payload = json.loads(text)
        sigma = np.array(
            [_INF if v == "inf" else float(v) for v in payload.pop("sigma")]
        )
        payload.pop("M", None)
        return cls(sigma=sigma, provenance=payload)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "SigmaParams":
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass
class EnsembleOutcome:
    """Result of one ensemble decode.

    selected_index is 1-based; pms/aborted/abort_leaves cover the invoked
    attempts (aborted attempts report their partial path metric).
    complexity_sc_equiv charges 1.0 per completed attempt and the
    f/g-evaluation fraction per aborted attempt.
    """

    x_hat: np.ndarray
    selected_index: int
    num_invoked: int
    pms: np.ndarray
    aborted: np.ndarray
    abort_leaves: np.ndarray
    complexity_sc_equiv: float


def _coerce_sigma(sigma, M: int) -> np.ndarray:
    s = sigma.sigma if isinstance(sigma, SigmaParams) else np.asarray(sigma, dtype=np.float64)
    if len(s) != M:
        raise ValueError(f"sigma has length {len(s)}, expected M={M}")
    return s


class EnsembleDecoder:
    """Ensemble of automorphism-conjugated SC attempts over one code.

    Holds mutable scratch; one instance per worker.  The sequential decoders
    consume attempts in list order, which is also the tie-break order.
    """

    def __init__(self, code: CodeSpec, perms, backend: str = "auto", exact_f: bool = False):
        if not perms:
            raise ValueError("need at least one permutation")
        self.code = code
        self.perms = list(perms)
        self.M = len(self.perms)
        self.kernel = make_kernel(code.frozen_mask, backend=backend, exact_f=exact_f)
        self.backend = self.kernel.backend
        self.tables = np.ascontiguousarray(
            np.stack([p.table for p in self.perms]), dtype=np.int32
        )
        self._winner = np.zeros(code.N, dtype=np.uint8)

    def adec(self, llr, perm, abort_threshold: float | None = None) -> ScOutcome:
        """Permute, SC-decode, inverse-permute the codeword estimate.

        perm may be an attempt index or any AffinePerm on the same space."""
        table = (
            self.tables[perm]
            if isinstance(perm, (int, np.integer))
            else np.ascontiguousarray(perm.table, dtype=np.int32)
        )
        llr = np.ascontiguousarray(llr, dtype=np.float64)
        thr = _INF if abort_threshold is None else float(abort_threshold)
        pm, aborted, abort_leaf, _ = self.kernel.decode_permuted(llr, table, thr)
        if aborted:
            return ScOutcome(None, None, pm, True, abort_leaf, fg_fraction(abort_leaf, self.code.n))
        x_hat = self.kernel.x_out.copy()
        return ScOutcome(u_from_codeword(x_hat), x_hat, pm, False, None, 1.0)

    def _run(self, llr, sigma, partial_abort: bool,
             eq_ref=None, eq_out=None, xhats_out=None) -> EnsembleOutcome:
        llr = np.ascontiguousarray(llr, dtype=np.float64)
        if len(llr) != self.code.N:
            raise ValueError(f"LLR length {len(llr)} != N={self.code.N}")
        kernel = self.kernel
        M = self.M
        pms = np.empty(M)
        aborted = np.zeros(M, dtype=bool)
        abort_leaves = np.full(M, -1, dtype=np.int64)
        best_pm = _INF
        best_idx = -1
        cost = 0.0
        invoked = 0
        for i in range(M):
            thr = best_pm if (partial_abort and i > 0) else _INF
            pm, ab, aleaf, _ = kernel.decode_permuted(llr, self.tables[i], thr)
            invoked = i + 1
            pms[i] = pm
            if ab:
                aborted[i] = True
                abort_leaves[i] = aleaf
                cost += fg_fraction(aleaf, self.code.n)
            else:
                cost += 1.0
                if eq_out is not None:
                    eq_out[i] = kernel.xout_equals(eq_ref)
                if xhats_out is not None:
                    xhats_out[i] = kernel.x_out
                if pm < best_pm:
                    best_pm = pm
                    best_idx = i
                    np.copyto(self._winner, kernel.x_out)
            if sigma is not None and best_pm < sigma[i]:
                break
        return EnsembleOutcome(
            x_hat=self._winner.copy(),
            selected_index=best_idx + 1,
            num_invoked=invoked,
            pms=pms[:invoked],
            aborted=aborted[:invoked],
            abort_leaves=abort_leaves[:invoked],
            complexity_sc_equiv=cost,
        )

    def ae(self, llr) -> EnsembleOutcome:
        """Run all M attempts and select the minimum-PM codeword (lowest index
        wins ties)."""
        return self._run(llr, None, False)

    def dae(self, llr, sigma) -> EnsembleOutcome:
        """Sequential ensemble: stop after attempt i once the running minimum
        PM falls below sigma[i]."""
        return self._run(llr, _coerce_sigma(sigma, self.M), False)

    def pdae(self, llr, sigma) -> EnsembleOutcome:
        """Like dae, but attempts after the first run with an abort threshold
        equal to the incumbent minimum PM: an attempt whose PM reaches it can
        no longer win, so it is cut short and charged its f/g fraction."""
        return self._run(llr, _coerce_sigma(sigma, self.M), True)

    def ae_attempts(self, llr, x_ref=None, xhats_out=None):
        """Run all M attempts; returns (pms, eq) where eq flags bit-exact
        equality of each attempt's codeword with x_ref (None if no reference).
        Optionally stores every attempt codeword into xhats_out (M x N)."""
        eq = None
        if x_ref is not None:
            eq = np.zeros(self.M, dtype=bool)
            x_ref = np.ascontiguousarray(x_ref, dtype=np.uint8)
        out = self._run(llr, None, False, eq_ref=x_ref, eq_out=eq, xhats_out=xhats_out)
        return out.pms, eq


def adec(y_llr, perm: AffinePerm, code: CodeSpec,
         abort_threshold: float | None = None, backend: str = "auto") -> ScOutcome:
    return EnsembleDecoder(code, [perm], backend=backend).adec(y_llr, 0, abort_threshold)


def ae_decode(y_llr, perms, code: CodeSpec, backend: str = "auto") -> EnsembleOutcome:
    return EnsembleDecoder(code, perms, backend=backend).ae(y_llr)


def dae_decode(y_llr, perms, code: CodeSpec, sigma, backend: str = "auto") -> EnsembleOutcome:
    return EnsembleDecoder(code, perms, backend=backend).dae(y_llr, sigma)


def pdae_decode(y_llr, perms, code: CodeSpec, sigma, backend: str = "auto") -> EnsembleOutcome:
    return EnsembleDecoder(code, perms, backend=backend).pdae(y_llr, sigma)


def lsm(y_soft, x_hat) -> float:
    """Squared Euclidean distance between the received soft vector and the
    BPSK image of the candidate (bit 0 -> +1, bit 1 -> -1)."""
    y = np.asarray(y_soft, dtype=np.float64)
    x = np.asarray(x_hat)
    if len(y) != len(x):
        raise ValueError("length mismatch")
    d = y - (1.0 - 2.0 * x)
    return float(d @ d)


def n_dec(outcomes) -> int:
    """Smallest subset size that guarantees the ensemble winner appears in any
    subset of completed attempts: M - (#attempts matching the winner) + 1."""
    pms = [o.pm for o in outcomes]
    xhats = [o.x_hat for o in outcomes]
    return ndec_from_arrays(np.asarray(pms), np.stack(xhats))


def ndec_from_arrays(pms: np.ndarray, xhats: np.ndarray) -> int:
    if len(pms) < 1:
        raise ValueError("need at least one outcome")
    w = int(np.argmin(pms))
    c = int(np.all(xhats == xhats[w], axis=1).sum())
    return len(pms) - c + 1


def _check_dist(dist) -> np.ndarray:
    p = np.asarray(dist, dtype=np.float64)
    if p.ndim != 1 or len(p) < 1:
        raise ValueError("distribution must be a 1-D vector over 1..M")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"not a probability distribution (sum={p.sum()!r})")
    return p


def ro_complexity(ndec_dist) -> float:
    """Mean of the required-subset-size distribution."""
    p = _check_dist(ndec_dist)
    return float(np.arange(1, len(p) + 1) @ p)


def fo_complexity(ndec_dist, M: int | None = None) -> float:
    """Expected attempts of a fixed-order oracle that stops at the first
    attempt producing the full-ensemble winner: E[(M+1)/(M - n_dec + 2)]."""
    p = _check_dist(ndec_dist)
    if M is None:
        M = len(p)
    if M != len(p):
        raise ValueError(f"distribution has {len(p)} entries, expected M={M}")
    k = np.arange(1, M + 1)
    return float(((M + 1) / (M - k + 2)) @ p)
