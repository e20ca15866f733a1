"""AWGN/BPSK Monte-Carlo harness: block-error and complexity estimation with
deterministic per-trial randomness and an SNR bisection search.

Determinism contract: trial t draws its message and noise from a counter-based
generator keyed by (master seed, t), so results are bit-identical regardless
of scheduling or worker count.  Accumulation happens over fixed-size trial
chunks reduced in index order; the stop rule is evaluated at chunk boundaries
so the reported prefix does not depend on how many workers ran.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codes import CodeSpec, embed_message, polar_transform
from .ensemble import EnsembleDecoder, SigmaParams, lsm, ndec_from_arrays

CHUNK_TRIALS = 2048

DECODER_KINDS = ("sc", "ae", "dae", "pdae")


class SearchError(RuntimeError):
    """SNR search could not bracket or converge to the target BLER."""


@dataclass(frozen=True)
class ChannelConfig:
    """BPSK over AWGN.  snr_db is Eb/N0 by default; pass convention="esn0" to
    interpret it as Es/N0 instead.  rate enters only the Eb/N0 conversion."""

    snr_db: float
    rate: float
    convention: str = "ebn0"

    def __post_init__(self):
        if self.convention not in ("ebn0", "esn0"):
            raise ValueError(f"unknown SNR convention {self.convention!r}")
        if self.convention == "ebn0" and not 0 < self.rate <= 1:
            raise ValueError("Eb/N0 conversion requires a rate in (0, 1]")

    @property
    def noise_sigma2(self) -> float:
        lin = 10 ** (self.snr_db / 10.0)
        if self.convention == "ebn0":
            lin *= self.rate
        return 1.0 / (2.0 * lin)

    @property
    def llr_scale(self) -> float:
        return 2.0 / self.noise_sigma2


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based per-trial stream; independent of scheduling."""
    return np.random.Generator(np.random.Philox(key=np.uint64([seed, trial])))


class TrialRngPool:
    """Rekeys a single counter-based generator per trial.

    Draws are identical to trial_rng(seed, trial) but without per-trial
    object construction; use one pool per worker.
    """

    def __init__(self):
        self._gen = np.random.Generator(np.random.Philox(key=np.uint64([0, 0])))
        self._state = self._gen.bit_generator.state

    def get(self, seed: int, trial: int) -> np.random.Generator:
        st = self._state
        st["state"]["key"][0] = seed
        st["state"]["key"][1] = trial
        st["state"]["counter"][:] = 0
        st["buffer_pos"] = 16
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._gen.bit_generator.state = st
        return self._gen


def transmit(x, cfg: ChannelConfig, rng: np.random.Generator):
    """BPSK-modulate, add AWGN of the configured variance, and convert to LLRs."""
    x = np.asarray(x)
    sigma = math.sqrt(cfg.noise_sigma2)
    y_soft = (1.0 - 2.0 * x) + sigma * rng.standard_normal(len(x))
    return y_soft, cfg.llr_scale * y_soft


@dataclass
class StopRule:
    """Stop after min_errors block errors or max_trials trials, whichever
    comes first (evaluated at chunk granularity)."""

    min_errors: int = 200
    max_trials: int = 2_000_000


@dataclass
class SimStats:
    trials: int
    block_errors: int
    bler: float
    mean_invoked: float
    mean_sc_equiv: float
    stderr_bler: float
    stderr_invoked: float
    stderr_sc_equiv: float
    snr_db: float = float("nan")
    decoder: str = ""

    @classmethod
    def from_sums(cls, trials, errors, inv_sum, inv_sq, cost_sum, cost_sq,
                  snr_db=float("nan"), decoder=""):
        bler = errors / trials
        mean_inv = inv_sum / trials
        mean_cost = cost_sum / trials
        var_inv = max(inv_sq / trials - mean_inv**2, 0.0)
        var_cost = max(cost_sq / trials - mean_cost**2, 0.0)
        return cls(
            trials=trials,
            block_errors=errors,
            bler=bler,
            mean_invoked=mean_inv,
            mean_sc_equiv=mean_cost,
            stderr_bler=math.sqrt(max(bler * (1 - bler), 0.0) / trials),
            stderr_invoked=math.sqrt(var_inv / trials),
            stderr_sc_equiv=math.sqrt(var_cost / trials),
            snr_db=snr_db,
            decoder=decoder,
        )


@dataclass
class TrialArrays:
    """Optional per-trial records from run_trials (index = trial number)."""

    correct: np.ndarray
    num_invoked: np.ndarray
    sc_equiv: np.ndarray


@dataclass(frozen=True)
class _Job:
    code: CodeSpec
    tables: np.ndarray
    decoder: str
    sigma: np.ndarray | None
    cfg: ChannelConfig
    seed: int
    backend: str
    collect: bool


def _make_ensemble(job: _Job) -> EnsembleDecoder:
    class _Raw:  # minimal stand-in so EnsembleDecoder can consume bare tables
        def __init__(self, table):
            self.table = table

    return EnsembleDecoder(job.code, [_Raw(t) for t in job.tables], backend=job.backend)


def _decode_one(dec: EnsembleDecoder, job: _Job, llr):
    if job.decoder == "ae" or job.decoder == "sc":
        return dec.ae(llr)
    if job.decoder == "dae":
        return dec.dae(llr, job.sigma)
    return dec.pdae(llr, job.sigma)


def _run_chunk(job: _Job, dec: EnsembleDecoder, start: int, count: int):
    errors = 0
    inv_sum = inv_sq = 0.0
    cost_sum = cost_sq = 0.0
    per_trial = (
        np.zeros((count, 3)) if job.collect else None
    )  # columns: correct, invoked, sc_equiv
    K = job.code.K
    pool = TrialRngPool()
    for t in range(start, start + count):
        rng = pool.get(job.seed, t)
        m = rng.integers(0, 2, size=K, dtype=np.uint8)
        x = polar_transform(embed_message(m, job.code))
        _, llr = transmit(x, job.cfg, rng)
        out = _decode_one(dec, job, llr)
        ok = np.array_equal(out.x_hat, x)
        errors += not ok
        inv_sum += out.num_invoked
        inv_sq += out.num_invoked**2
        cost_sum += out.complexity_sc_equiv
        cost_sq += out.complexity_sc_equiv**2
        if per_trial is not None:
            per_trial[t - start] = (ok, out.num_invoked, out.complexity_sc_equiv)
    return errors, inv_sum, inv_sq, cost_sum, cost_sq, per_trial


_WORKER_JOB: _Job | None = None
_WORKER_DEC: EnsembleDecoder | None = None


def _worker_init(job: _Job):
    global _WORKER_JOB, _WORKER_DEC
    _WORKER_JOB = job
    _WORKER_DEC = _make_ensemble(job)


def _worker_chunk(args):
    start, count = args
    return _run_chunk(_WORKER_JOB, _WORKER_DEC, start, count)


def run_trials(
    code: CodeSpec,
    perms,
    decoder_kind: str,
    sigma=None,
    cfg: ChannelConfig | None = None,
    stop_rule: StopRule | None = None,
    seed: int = 0,
    workers: int = 1,
    backend: str = "auto",
    return_per_trial: bool = False,
):
    """Monte-Carlo loop: random message -> encode -> AWGN -> decode -> compare.

    decoder_kind "sc" ignores perms and runs a single identity attempt; "dae"
    and "pdae" require sigma.  Deterministic under (seed, stop_rule).
    """
    if decoder_kind not in DECODER_KINDS:
        raise ValueError(f"unknown decoder kind {decoder_kind!r}")
    if cfg is None:
        raise ValueError("a ChannelConfig is required")
    stop_rule = stop_rule or StopRule()
    if decoder_kind == "sc":
        tables = np.arange(code.N, dtype=np.int32)[None, :]
    else:
        tables = np.ascontiguousarray(
            np.stack([p.table for p in perms]), dtype=np.int32
        )
    sig = None
    if decoder_kind in ("dae", "pdae"):
        if sigma is None:
            raise ValueError(f"{decoder_kind} requires sigma")
        sig = sigma.sigma if isinstance(sigma, SigmaParams) else np.asarray(sigma, float)
    job = _Job(code, tables, decoder_kind, sig, cfg, seed, backend, return_per_trial)

    num_chunks = -(-stop_rule.max_trials // CHUNK_TRIALS)
    sizes = [
        min(CHUNK_TRIALS, stop_rule.max_trials - c * CHUNK_TRIALS)
        for c in range(num_chunks)
    ]
    results: dict[int, tuple] = {}

    if workers <= 1:
        dec = _make_ensemble(job)
        for c in range(num_chunks):
            results[c] = _run_chunk(job, dec, c * CHUNK_TRIALS, sizes[c])
            if _prefix_done(results, c, stop_rule):
                break
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(job,)
        ) as pool:
            wave = max(workers * 4, 8)
            nxt = 0
            done = None
            while nxt < num_chunks and done is None:
                hi = min(nxt + wave, num_chunks)
                args = [(c * CHUNK_TRIALS, sizes[c]) for c in range(nxt, hi)]
                for c, res in zip(range(nxt, hi), pool.map(_worker_chunk, args)):
                    results[c] = res
                for c in range(nxt, hi):
                    if _prefix_done(results, c, stop_rule):
                        done = c
                        break
                nxt = hi

    last = max(c for c in results if _included(results, c, stop_rule))
    trials = sum(sizes[c] for c in range(last + 1))
    errors = sum(results[c][0] for c in range(last + 1))
    sums = [sum(results[c][i] for c in range(last + 1)) for i in range(1, 5)]
    stats = SimStats.from_sums(
        trials, errors, *sums, snr_db=cfg.snr_db, decoder=decoder_kind
    )
    if not return_per_trial:
        return stats
    per = np.concatenate([results[c][5] for c in range(last + 1)])
    arrays = TrialArrays(
        correct=per[:, 0].astype(bool),
        num_invoked=per[:, 1].astype(np.int64),
        sc_equiv=per[:, 2].copy(),
    )
    return stats, arrays


def _prefix_done(results, c, rule: StopRule) -> bool:
    if any(i not in results for i in range(c + 1)):
        return False
    return sum(results[i][0] for i in range(c + 1)) >= rule.min_errors


def _included(results, c, rule: StopRule) -> bool:
    """Chunk c is part of the reported prefix if no earlier boundary met the
    error target."""
    if any(i not in results for i in range(c + 1)):
        return False
    before = sum(results[i][0] for i in range(c))
    return before < rule.min_errors


def find_snr_at_bler(
    code: CodeSpec,
    perms,
    decoder_kind: str,
    target_bler: float,
    tolerance: float = 0.15,
    sigma=None,
    seed: int = 0,
    workers: int = 1,
    bracket: tuple[float, float] = (0.0, 7.0),
    min_errors: int = 120,
    max_trials: int = 4_000_000,
    max_iters: int = 24,
    backend: str = "auto",
):
    """Bisect Eb/N0 until the measured BLER lies within target*(1 +- tolerance)
    with at least max(100, min_errors) block errors at the returned point."""
    if not 0 < target_bler < 1:
        raise ValueError("target BLER must be in (0, 1)")
    min_errors = max(100, min_errors)
    history = []
    # Classification points only need a coarse above/below answer; points near
    # the target are remeasured at full precision, so cap the trial counts to
    # keep far-from-target evaluations cheap.
    coarse_cap = min(max_trials, int(30 / target_bler) + 2000)
    fine_cap = min(max_trials, int(2.4 * min_errors / target_bler) + 2000)

    def measure(snr, eval_idx, errs, cap):
        cfg = ChannelConfig(snr_db=snr, rate=code.rate)
        st = run_trials(
            code, perms, decoder_kind, sigma=sigma, cfg=cfg,
            stop_rule=StopRule(min_errors=errs, max_trials=cap),
            seed=seed + 7919 * (eval_idx + 1), workers=workers, backend=backend,
        )
        history.append((snr, st.bler, st.block_errors, st.trials))
        return st

    lo, hi = bracket
    st_lo = measure(lo, 0, 40, coarse_cap)
    st_hi = measure(hi, 1, 40, coarse_cap)
    grow = 0
    while st_lo.bler <= target_bler and grow < 3:
        lo -= 2.0
        grow += 1
        st_lo = measure(lo, 1 + grow, 40, coarse_cap)
    while st_hi.bler >= target_bler and grow < 6:
        hi += 2.0
        grow += 1
        st_hi = measure(hi, 1 + grow, 40, coarse_cap)
    if st_lo.bler <= target_bler or st_hi.bler >= target_bler:
        raise SearchError(
            f"could not bracket BLER {target_bler} on [{lo}, {hi}]; history={history}"
        )

    band = (target_bler * (1 - tolerance), target_bler * (1 + tolerance))
    stage1_cap = min(max_trials, int(56 / target_bler) + 2000)
    for it in range(max_iters):
        mid = 0.5 * (lo + hi)
        st = measure(mid, 10 + 2 * it, 48, stage1_cap)
        near = 0.5 * target_bler <= st.bler <= 1.6 * target_bler
        if near:
            st = measure(mid, 11 + 2 * it, min_errors, fine_cap)
            if band[0] <= st.bler <= band[1] and st.block_errors >= min_errors:
                return mid
        if st.bler > target_bler:
            lo = mid
        else:
            hi = mid
    raise SearchError(
        f"bisection did not converge to BLER {target_bler}*(1+-{tolerance}); "
        f"history={history}"
    )


def ndec_distribution(
    code: CodeSpec,
    perms,
    cfg: ChannelConfig,
    num_trials: int,
    seed: int = 0,
    backend: str = "auto",
):
    """Empirical distribution of the required-subset-size statistic over
    num_trials full-ensemble decodes.  Returns (probability vector over 1..M,
    per-trial values)."""
    dec = EnsembleDecoder(code, perms, backend=backend)
    M = dec.M
    xhats = np.zeros((M, code.N), dtype=np.uint8)
    vals = np.zeros(num_trials, dtype=np.int64)
    pool = TrialRngPool()
    for t in range(num_trials):
        rng = pool.get(seed, t)
        m = rng.integers(0, 2, size=code.K, dtype=np.uint8)
        x = polar_transform(embed_message(m, code))
        _, llr = transmit(x, cfg, rng)
        pms, _ = dec.ae_attempts(llr, xhats_out=xhats)
        vals[t] = ndec_from_arrays(pms, xhats)
    dist = np.bincount(vals, minlength=M + 1)[1:] / num_trials
    return dist, vals


def metric_rows(
    code: CodeSpec,
    perms,
    cfg: ChannelConfig,
    num_trials: int,
    seed: int = 0,
    backend: str = "auto",
):
    """Per-attempt (pm, lsm, correct) rows from full-ensemble decodes, the raw
    material for metric-versus-outcome distribution comparisons."""
    dec = EnsembleDecoder(code, perms, backend=backend)
    M = dec.M
    xhats = np.zeros((M, code.N), dtype=np.uint8)
    rows = np.zeros((num_trials * M, 3))
    pool = TrialRngPool()
    for t in range(num_trials):
        rng = pool.get(seed, t)
        m = rng.integers(0, 2, size=code.K, dtype=np.uint8)
        x = polar_transform(embed_message(m, code))
        y_soft, llr = transmit(x, cfg, rng)
        pms, eq = dec.ae_attempts(llr, x_ref=x, xhats_out=xhats)
        for j in range(M):
            rows[t * M + j] = (pms[j], lsm(y_soft, xhats[j]), eq[j])
    return rows
