"""Monte-Carlo optimization of the sequential-ensemble stopping thresholds.

A trace dataset records, for each noisy vector, the running minimum PM after
every attempt and whether the running winner was correct at each prefix.  An
error allocation (how many extra errors each step may introduce) maps to a
unique threshold vector on a fixed dataset; complexity of a candidate is
evaluated by replaying the stopping rule over the traces, never by
re-decoding.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .codes import CodeSpec, embed_message, polar_transform
from .ensemble import EnsembleDecoder, SigmaParams

_INF = math.inf


@dataclass
class TraceRecord:
    """One received vector's trace: d[i] is the minimum PM over the first i+1
    attempts; step_correct[i] flags whether the prefix winner equals the
    transmitted codeword."""

    d: np.ndarray
    step_correct: np.ndarray
    final_correct: bool
    ml_error: bool


class TraceDataset:
    """Columnar storage of TraceRecords plus collection metadata."""

    def __init__(self, d, step_correct, final_correct, ml_error, meta=None):
        self.d = np.asarray(d, dtype=np.float64)
        self.step_correct = np.asarray(step_correct, dtype=bool)
        self.final_correct = np.asarray(final_correct, dtype=bool)
        self.ml_error = np.asarray(ml_error, dtype=bool)
        self.meta = dict(meta or {})
        B, M = self.d.shape
        if self.step_correct.shape != (B, M):
            raise ValueError("d and step_correct shapes disagree")
        if len(self.final_correct) != B or len(self.ml_error) != B:
            raise ValueError("per-record flag lengths disagree")

    def __len__(self):
        return self.d.shape[0]

    @property
    def M(self) -> int:
        return self.d.shape[1]

    @property
    def success_mask(self) -> np.ndarray:
        return self.final_correct

    @property
    def xi(self) -> float:
        """Measured full-ensemble block-error rate of the dataset."""
        return 1.0 - float(self.final_correct.mean())

    def subset(self, mask) -> "TraceDataset":
        return TraceDataset(
            self.d[mask], self.step_correct[mask], self.final_correct[mask],
            self.ml_error[mask], self.meta,
        )

    def record(self, i: int) -> TraceRecord:
        return TraceRecord(
            self.d[i], self.step_correct[i],
            bool(self.final_correct[i]), bool(self.ml_error[i]),
        )

    def save(self, path) -> None:
        np.savez_compressed(
            path,
            d=self.d,
            step_correct=np.packbits(self.step_correct, axis=1),
            final_correct=self.final_correct,
            ml_error=self.ml_error,
            M=np.int64(self.M),
            meta=json.dumps(self.meta, sort_keys=True),
        )

    @classmethod
    def load(cls, path) -> "TraceDataset":
        with np.load(path, allow_pickle=False) as z:
            M = int(z["M"])
            step = np.unpackbits(z["step_correct"], axis=1)[:, :M].astype(bool)
            return cls(z["d"], step, z["final_correct"], z["ml_error"],
                       json.loads(str(z["meta"])))


def _traces_from_attempts(pms: np.ndarray, eq: np.ndarray):
    """Vectorized prefix-winner bookkeeping.

    pms, eq have shape (B, M).  The winner after i+1 attempts is the earliest
    attempt achieving the running-minimum PM (strict improvements move it)."""
    B, M = pms.shape
    d = np.minimum.accumulate(pms, axis=1)
    prev = np.concatenate([np.full((B, 1), _INF), d[:, :-1]], axis=1)
    improved = pms < prev
    idx = np.where(improved, np.arange(M)[None, :], -1)
    winner = np.maximum.accumulate(idx, axis=1)
    step_correct = np.take_along_axis(eq, winner, axis=1)
    final_correct = step_correct[:, -1]
    ml_error = eq.any(axis=1) & ~final_correct
    return d, step_correct, final_correct, ml_error


_COLLECT_CTX = None


def _collect_chunk_impl(code, tables, cfg, seed, start, count, dec):
    from .sim import TrialRngPool, transmit

    M = tables.shape[0]
    pms = np.empty((count, M))
    eq = np.empty((count, M), dtype=bool)
    pool = TrialRngPool()
    for t in range(start, start + count):
        rng = pool.get(seed, t)
        m = rng.integers(0, 2, size=code.K, dtype=np.uint8)
        x = polar_transform(embed_message(m, code))
        _, llr = transmit(x, cfg, rng)
        p, e = dec.ae_attempts(llr, x_ref=x)
        pms[t - start] = p
        eq[t - start] = e
    return pms, eq


def _collect_init(code, tables, cfg, seed, backend):
    global _COLLECT_CTX

    class _Raw:
        def __init__(self, table):
            self.table = table

    dec = EnsembleDecoder(code, [_Raw(t) for t in tables], backend=backend)
    _COLLECT_CTX = (code, tables, cfg, seed, dec)


def _collect_worker(args):
    start, count = args
    code, tables, cfg, seed, dec = _COLLECT_CTX
    return _collect_chunk_impl(code, tables, cfg, seed, start, count, dec)


def collect_dataset(
    code: CodeSpec,
    perms,
    snr_db: float,
    num_vectors: int,
    seed: int = 0,
    workers: int = 1,
    backend: str = "auto",
    ensemble_id: str = "",
):
    """Decode num_vectors noisy vectors with the full ensemble (no stopping)
    and record the traces.  Returns (dataset, success mask, measured xi)."""
    from .sim import CHUNK_TRIALS, ChannelConfig

    if num_vectors < 1:
        raise ValueError("num_vectors must be >= 1")
    cfg = ChannelConfig(snr_db=snr_db, rate=code.rate)
    tables = np.ascontiguousarray(np.stack([p.table for p in perms]), dtype=np.int32)
    chunks = []
    bounds = [
        (c * CHUNK_TRIALS, min(CHUNK_TRIALS, num_vectors - c * CHUNK_TRIALS))
        for c in range(-(-num_vectors // CHUNK_TRIALS))
    ]
    if workers <= 1:
        _collect_init(code, tables, cfg, seed, backend)
        for b in bounds:
            chunks.append(_collect_worker(b))
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_collect_init,
            initargs=(code, tables, cfg, seed, backend),
        ) as pool:
            chunks = list(pool.map(_collect_worker, bounds))
    pms = np.concatenate([c[0] for c in chunks])
    eq = np.concatenate([c[1] for c in chunks])
    d, step_correct, final_correct, ml_error = _traces_from_attempts(pms, eq)
    meta = {
        "code": code.label(),
        "ensemble_id": ensemble_id,
        "snr_db": snr_db,
        "seed": seed,
        "M": int(tables.shape[0]),
        "num_vectors": int(num_vectors),
    }
    ds = TraceDataset(d, step_correct, final_correct, ml_error, meta)
    return ds, ds.success_mask, ds.xi


@dataclass
class ErrorAllocation:
    """Per-step budget of additional errors; the final step never stops early
    by construction, so its entry is zero."""

    e: np.ndarray
    budget: int
    redistributed: bool = False

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=np.int64)
        if self.e[-1] != 0:
            raise ValueError("the last allocation entry must be 0")
        if np.any(self.e < 0):
            raise ValueError("allocations must be nonnegative")
        if self.e.sum() > self.budget:
            raise ValueError(f"allocation sum {self.e.sum()} exceeds budget {self.budget}")


def sigma_from_allocation(dataset: TraceDataset, alloc: ErrorAllocation | np.ndarray,
                          provenance: dict | None = None) -> SigmaParams:
    """Map an error allocation to its unique threshold vector on this dataset.

    Walking steps in order over records still active (not yet stopped), the
    threshold sits at the (e_i+1)-th smallest running-minimum PM among records
    a stop would newly break (prefix winner wrong but final winner correct),
    so at most e_i of them fall strictly below it.  Duplicate PM values at the
    cut resolve toward fewer stops.
    """
    e = alloc.e if isinstance(alloc, ErrorAllocation) else np.asarray(alloc, dtype=np.int64)
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    M = dataset.M
    if len(e) != M:
        raise ValueError(f"allocation length {len(e)} != M={M}")
    sigma = np.full(M, _INF)
    active = np.ones(len(dataset), dtype=bool)
    for i in range(M - 1):
        if e[i] < 0:
            raise ValueError("allocations must be nonnegative")
        w = active & ~dataset.step_correct[:, i] & dataset.final_correct
        dvals = dataset.d[w, i]
        if len(dvals) > e[i]:
            sigma[i] = np.partition(dvals, e[i])[e[i]]
        active &= ~(dataset.d[:, i] < sigma[i])
    return SigmaParams(sigma=sigma, provenance=provenance or {})


def replay_stop_steps(dataset: TraceDataset, sigma) -> np.ndarray:
    """1-based stopping step of every record under the threshold rule."""
    s = sigma.sigma if isinstance(sigma, SigmaParams) else np.asarray(sigma, dtype=np.float64)
    if len(s) != dataset.M:
        raise ValueError(f"sigma length {len(s)} != M={dataset.M}")
    hit = dataset.d < s[None, :]
    hit[:, -1] = True  # the decoder always stops at step M
    return np.argmax(hit, axis=1) + 1


def replay_complexity(dataset: TraceDataset, sigma):
    """Mean number of invoked attempts plus the per-step net new-error counts
    (wrong stops of finally-correct records minus lucky stops of finally-wrong
    records) under the stopping rule, computed by trace replay."""
    stops = replay_stop_steps(dataset, sigma)
    m_bar = float(stops.mean())
    M = dataset.M
    added = np.zeros(M, dtype=np.int64)
    step_idx = stops - 1
    stop_correct = dataset.step_correct[np.arange(len(dataset)), step_idx]
    plus = ~stop_correct & dataset.final_correct
    minus = stop_correct & ~dataset.final_correct
    np.add.at(added, step_idx[plus], 1)
    np.add.at(added, step_idx[minus], -1)
    return m_bar, added


@dataclass
class SearchLog:
    """Iteration trace of the allocation hill climb."""

    iterations: list = field(default_factory=list)
    converged: bool = False
    initial_m_bar: float = float("nan")
    final_m_bar: float = float("nan")


def initial_allocation(E: int, M: int) -> ErrorAllocation:
    """Spread the budget uniformly: ceil(E/(M-1)) on steps 1..M-2 and the
    remainder on step M-1.  If the remainder would be negative the budget is
    redistributed evenly instead (flagged)."""
    e = np.zeros(M, dtype=np.int64)
    if M < 2:
        return ErrorAllocation(e=e, budget=E)
    head = -(-E // (M - 1))
    e[: M - 2] = head
    e[M - 2] = E - head * (M - 2)
    if e[M - 2] < 0:
        base, rem = divmod(E, M - 1)
        e[: M - 1] = base
        e[:rem] += 1
        return ErrorAllocation(e=e, budget=E, redistributed=True)
    return ErrorAllocation(e=e, budget=E)


def error_allocation_search(
    dataset: TraceDataset,
    E: int,
    T_max: int = 200,
    kappa: int = 5,
) -> tuple[ErrorAllocation, SearchLog]:
    """Steepest-ascent hill climb over error allocations.

    Each iteration exhaustively scans adding kappa to the best step, commits
    it, then scans removing kappa (candidates that would go negative are
    infeasible); it stops when the add and remove positions coincide or after
    T_max iterations.  Complexity is measured by trace replay on the given
    dataset, which the caller typically restricts to successfully decoded
    records.
    """
    if E < 0 or T_max < 1 or kappa < 1:
        raise ValueError("need E >= 0, T_max >= 1, kappa >= 1")
    M = dataset.M
    alloc = initial_allocation(E, M)
    e_star = alloc.e.copy()

    def m_bar_of(e) -> float:
        if np.any(e < 0):
            return _INF
        return replay_complexity(dataset, sigma_from_allocation(dataset, e).sigma)[0]

    log = SearchLog()
    log.initial_m_bar = m_bar_of(e_star)
    log.iterations.append({"T": 0, "e": e_star.tolist(), "m_bar": log.initial_m_bar})
    i_min, j_min, T = 0, 1, 0
    while i_min != j_min and T < T_max:
        best = _INF
        for i in range(M - 1):
            cand = e_star.copy()
            cand[i] += kappa
            mb = m_bar_of(cand)
            if mb < best:
                best = mb
                i_min = i
        e_star[i_min] += kappa
        best = _INF
        for j in range(M - 1):
            cand = e_star.copy()
            cand[j] -= kappa
            mb = m_bar_of(cand)
            if mb < best:
                best = mb
                j_min = j
        e_star[j_min] -= kappa
        T += 1
        log.iterations.append(
            {"T": T, "e": e_star.tolist(), "m_bar": m_bar_of(e_star),
             "i_min": i_min + 1, "j_min": j_min + 1}
        )
    log.converged = i_min == j_min
    log.final_m_bar = m_bar_of(e_star)
    result = ErrorAllocation(e=e_star, budget=E, redistributed=alloc.redistributed)
    return result, log


def optimize_sigma(
    dataset: TraceDataset,
    epsilon: float,
    kappa: int = 5,
    T_max: int = 200,
    provenance: dict | None = None,
):
    """Full pipeline: derive the error budget from the BLER degradation target,
    hill-climb the allocation on the successful subset, and return the
    threshold vector fitted on it."""
    success = dataset.subset(dataset.success_mask)
    E = int(epsilon * len(success))
    alloc, log = error_allocation_search(success, E, T_max=T_max, kappa=kappa)
    prov = dict(provenance or {})
    prov.update(
        {
            "xi": dataset.xi,
            "epsilon": epsilon,
            "dataset_size": len(dataset),
            "budget": E,
            "allocation": alloc.e.tolist(),
        }
    )
    prov.setdefault("code", dataset.meta.get("code", ""))
    prov.setdefault("ensemble_id", dataset.meta.get("ensemble_id", ""))
    prov.setdefault("seed", dataset.meta.get("seed", 0))
    sigma = sigma_from_allocation(success, alloc, provenance=prov)
    return sigma, alloc, log
