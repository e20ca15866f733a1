"""Polar and Reed-Muller code construction in the polar formalism, plus encoding.

Bit-index convention used throughout the package: index k is identified with
its LSB-first binary vector (bit 0 = least significant).  The generator is the
n-th Kronecker power of [[1, 0], [1, 1]] and encoding is the natural-order
butterfly, so leaf/coordinate indices never get bit-reversed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConstructionError(Exception):
    """A code construction failed one of its structural requirements."""


def rm_info_set(n: int, r: int) -> tuple[int, ...]:
    """Indices whose binary representation has at least n - r ones."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= r <= n:
        raise ValueError(f"r must be in [0, {n}], got {r}")
    return tuple(k for k in range(1 << n) if bin(k).count("1") >= n - r)


def upo_leq(i: int, j: int) -> bool:
    """Universal partial order on bit-channel indices: i <= j iff every one-bit
    of i can be matched to a distinct one-bit of j at an equal or more
    significant position (bitwise domination plus upward swaps)."""
    oi = [p for p in range(i.bit_length()) if (i >> p) & 1]
    oj = [p for p in range(j.bit_length()) if (j >> p) & 1]
    if len(oi) > len(oj):
        return False
    return all(qj >= qi for qi, qj in zip(reversed(oi), reversed(oj)))


def check_upo_closed(info_set, n: int) -> None:
    """Raise ConstructionError if some index outside the set dominates one inside."""
    members = set(info_set)
    outside = [k for k in range(1 << n) if k not in members]
    for k in members:
        for j in outside:
            if upo_leq(k, j):
                raise ConstructionError(
                    f"info set is not closed under the universal partial order: "
                    f"{k} <= {j} but {j} is frozen"
                )


# Gaussian-approximation density evolution (Chung et al. phi function).

def _phi(x: np.ndarray) -> np.ndarray:
    out = np.ones_like(x)
    pos = x > 0
    out[pos] = np.exp(-0.4527 * x[pos] ** 0.86 + 0.0218)
    return out


def _phi_inv(y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    need = y < 1.0
    lo = np.zeros(np.count_nonzero(need))
    hi = np.full_like(lo, 500.0)
    target = y[need]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        above = _phi(mid) > target
        lo[above] = mid[above]
        hi[~above] = mid[~above]
    out[need] = 0.5 * (lo + hi)
    return out


def ga_llr_means(n: int, design_snr_db: float) -> np.ndarray:
    """Mean leaf LLR of each bit channel under GA density evolution.

    design_snr_db is Es/N0 in dB for unit-energy BPSK, giving a channel LLR
    mean of 4 * 10^(snr/10).
    """
    m = np.array([4.0 * 10 ** (design_snr_db / 10.0)])
    for _ in range(n):
        out = np.empty(2 * len(m))
        out[0::2] = _phi_inv(1.0 - (1.0 - _phi(m)) ** 2)
        out[1::2] = 2.0 * m
        m = out
    return m


def polar_info_set(n: int, K: int, design_snr_db: float) -> tuple[int, ...]:
    """The K most reliable indices under GA density evolution at design_snr_db.

    The result must be closed under the universal partial order; a violation
    raises ConstructionError (it signals a reliability-model problem, and the
    block-triangular automorphism group would not apply).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    N = 1 << n
    if not 0 <= K <= N:
        raise ValueError(f"K must be in [0, {N}], got {K}")
    if K == 0:
        return ()
    means = ga_llr_means(n, design_snr_db)
    order = np.lexsort((np.arange(N), means))
    chosen = tuple(sorted(int(k) for k in order[N - K:]))
    check_upo_closed(chosen, n)
    return chosen


def _block_of(bit: int, profile) -> int:
    acc = 0
    for bi, size in enumerate(profile):
        acc += size
        if bit < acc:
            return bi
    raise ValueError(f"bit {bit} outside profile {profile}")


def blta_symmetric_info_set(
    n: int, K: int, profile, design_snr_db: float
) -> tuple[int, ...]:
    """A UPO-closed info set of size K that is invariant under bit permutations
    within the given blocks (least-significant block first).

    Such a set admits the full block-lower-triangular affine group of the
    profile as code automorphisms.  Indices are grouped into orbits by their
    per-block popcount signature; the search enumerates upward-closed orbit
    unions of total size K and returns the one minimizing the GA-implied sum
    of bit-channel error probabilities.
    """
    if sum(profile) != n:
        raise ValueError(f"profile {profile} does not sum to n={n}")
    N = 1 << n
    means = ga_llr_means(n, design_snr_db)
    # Q(sqrt(m/2)) is the GA per-channel error probability.
    pes = 0.5 * np.array([math.erfc(math.sqrt(m / 2.0) / math.sqrt(2.0)) for m in means])

    orbits: dict[tuple[int, ...], list[int]] = {}
    for k in range(N):
        sig = [0] * len(profile)
        for bit in range(n):
            if (k >> bit) & 1:
                sig[_block_of(bit, profile)] += 1
        orbits.setdefault(tuple(sig), []).append(k)
    keys = sorted(orbits)
    sizes = {s: len(orbits[s]) for s in keys}
    costs = {s: float(pes[orbits[s]].sum()) for s in keys}
    above = {
        s: [t for t in keys if t != s and _orbit_leq(orbits[s], orbits[t])]
        for s in keys
    }

    # Depth-first enumeration of upward-closed orbit subsets summing to K.
    order = sorted(keys, key=lambda s: (-sum(s), s))
    best: tuple[float, frozenset] | None = None

    def rec(idx: int, chosen: frozenset, total: int, cost: float) -> None:
        nonlocal best
        if total == K:
            if best is None or cost < best[0]:
                best = (cost, chosen)
            return
        if idx == len(order) or total > K:
            return
        remaining = sum(sizes[s] for s in order[idx:])
        if total + remaining < K:
            return
        s = order[idx]
        if all(t in chosen for t in above[s]):
            rec(idx + 1, chosen | {s}, total + sizes[s], cost + costs[s])
        rec(idx + 1, chosen, total, cost)

    rec(0, frozenset(), 0, 0.0)
    if best is None:
        raise ConstructionError(
            f"no block-symmetric UPO-closed set of size {K} exists for profile {profile}"
        )
    info = tuple(sorted(k for s in best[1] for k in orbits[s]))
    check_upo_closed(info, n)
    return info


def _orbit_leq(orb_a, orb_b) -> bool:
    return any(upo_leq(a, b) for a in orb_a for b in orb_b)


@dataclass(frozen=True)
class CodeSpec:
    """Immutable description of a polar-formalism code.

    Safe to share across workers; all mutable decoder state lives elsewhere.
    """

    n: int
    info_set: tuple[int, ...]
    family: str = "custom"
    N: int = field(init=False)
    K: int = field(init=False)
    frozen_set: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        N = 1 << self.n
        info = tuple(sorted(self.info_set))
        if len(set(info)) != len(info):
            raise ValueError("info set contains duplicate indices")
        if info and not (0 <= info[0] and info[-1] < N):
            raise ValueError(f"info indices must lie in [0, {N})")
        object.__setattr__(self, "info_set", info)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "K", len(info))
        members = set(info)
        object.__setattr__(
            self, "frozen_set", tuple(k for k in range(N) if k not in members)
        )

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.N, dtype=np.int8)
        mask[list(self.info_set)] = 0
        return mask

    @property
    def info_mask(self) -> np.ndarray:
        return (1 - self.frozen_mask).astype(bool)

    @classmethod
    def reed_muller(cls, n: int, r: int) -> "CodeSpec":
        return cls(n=n, info_set=rm_info_set(n, r), family=f"RM({n},{r})")

    @classmethod
    def polar(cls, n: int, K: int, design_snr_db: float) -> "CodeSpec":
        info = polar_info_set(n, K, design_snr_db)
        return cls(n=n, info_set=info, family=f"polar-ga({design_snr_db}dB)")

    def label(self) -> str:
        return f"{self.family}[N={self.N},K={self.K}]"


def load_info_set(path) -> CodeSpec:
    """Read an info-set file: line 1 is "N K", line 2 lists the K info indices."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if len(lines) < 2:
        raise ValueError(f"{path}: expected two non-empty lines")
    try:
        N, K = (int(tok) for tok in lines[0].split())
        info = tuple(int(tok) for tok in lines[1].split())
    except ValueError as exc:
        raise ValueError(f"{path}: malformed info-set file: {exc}") from None
    n = N.bit_length() - 1
    if 1 << n != N:
        raise ValueError(f"{path}: N={N} is not a power of two")
    if len(info) != K:
        raise ValueError(f"{path}: header says K={K} but {len(info)} indices listed")
    return CodeSpec(n=n, info_set=info, family=f"file:{path}")


def save_info_set(code: CodeSpec, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{code.N} {code.K}\n")
        fh.write(" ".join(str(k) for k in code.info_set) + "\n")


def polar_transform(u: np.ndarray) -> np.ndarray:
    """x = u G_N over GF(2) via the in-place natural-order butterfly.

    The transform is an involution: applying it twice returns the input.
    """
    x = np.array(u, dtype=np.uint8)
    N = len(x)
    if N & (N - 1):
        raise ValueError(f"length {N} is not a power of two")
    step = 1
    while step < N:
        v = x.reshape(-1, 2 * step)
        v[:, :step] ^= v[:, step:]
        step *= 2
    return x


def encode(u: np.ndarray, code: CodeSpec) -> np.ndarray:
    """Encode an input vector; frozen positions must be zero."""
    u = np.asarray(u, dtype=np.uint8)
    if len(u) != code.N:
        raise ValueError(f"input length {len(u)} != N={code.N}")
    if np.any(u[code.frozen_mask == 1]):
        raise ValueError("input has a nonzero frozen position")
    return polar_transform(u)


def embed_message(m: np.ndarray, code: CodeSpec) -> np.ndarray:
    """Place K message bits at the info positions (ascending index order)."""
    m = np.asarray(m, dtype=np.uint8)
    if len(m) != code.K:
        raise ValueError(f"message length {len(m)} != K={code.K}")
    u = np.zeros(code.N, dtype=np.uint8)
    u[list(code.info_set)] = m
    return u


def is_codeword(x: np.ndarray, code: CodeSpec) -> bool:
    """Membership test via the involution: transform back and check frozen bits."""
    u = polar_transform(np.asarray(x, dtype=np.uint8))
    return not bool(np.any(u[code.frozen_mask == 1]))
