"""Affine permutations of the bit-index space acting as code automorphisms.

A permutation is the map z -> A z xor b on LSB-first bit vectors of the
coordinate index z, materialized as an index table of length N so that
applying it to a vector is a single gather/scatter.
"""

from __future__ import annotations

import numpy as np

from . import gf2
from .codes import CodeSpec, embed_message, is_codeword, polar_transform


class SamplingError(Exception):
    """Rejection sampling exhausted its budget."""


class AffinePerm:
    """Invertible affine map on GF(2)^n bit-index space.

    Immutable after construction; the index table (and its inverse) are
    materialized once so vector application is O(N).
    """

    __slots__ = ("A", "b", "n", "N", "table", "inv_table")

    def __init__(self, A: np.ndarray, b: np.ndarray):
        A = np.asarray(A, dtype=np.uint8) & 1
        b = np.asarray(b, dtype=np.uint8) & 1
        n = len(b)
        if A.shape != (n, n):
            raise ValueError(f"A must be {n}x{n}, got {A.shape}")
        if not gf2.is_invertible(A):
            raise ValueError("A is singular over GF(2)")
        self.A = A
        self.b = b
        self.n = n
        self.N = 1 << n
        zbits = ((np.arange(self.N)[:, None] >> np.arange(n)) & 1).astype(np.uint8)
        out_bits = (zbits @ A.T + b) & 1
        table = out_bits.astype(np.int64) @ (1 << np.arange(n))
        self.table = np.ascontiguousarray(table, dtype=np.int32)
        inv = np.empty_like(self.table)
        inv[self.table] = np.arange(self.N, dtype=np.int32)
        self.inv_table = inv

    @classmethod
    def identity(cls, n: int) -> "AffinePerm":
        return cls(gf2.identity(n), np.zeros(n, dtype=np.uint8))

    def __repr__(self):
        return f"AffinePerm(n={self.n}, line={self.to_line()!r})"

    def __eq__(self, other):
        return (
            isinstance(other, AffinePerm)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
        )

    def __hash__(self):
        return hash((self.A.tobytes(), self.b.tobytes()))

    def to_line(self) -> str:
        """Serialize as hex tokens: one per matrix row (LSB-first column bits),
        then the translation vector."""
        rows = [format(gf2.bits_to_int(row), "x") for row in self.A]
        return " ".join(rows + [format(gf2.bits_to_int(self.b), "x")])

    @classmethod
    def from_line(cls, line: str) -> "AffinePerm":
        toks = line.split()
        if len(toks) < 2:
            raise ValueError(f"malformed permutation line: {line!r}")
        n = len(toks) - 1
        A = np.stack([gf2.int_to_bits(int(t, 16), n) for t in toks[:n]])
        b = gf2.int_to_bits(int(toks[n], 16), n)
        return cls(A, b)


def apply_perm(perm: AffinePerm, v: np.ndarray) -> np.ndarray:
    """Coordinate permutation: output[table[z]] = v[z]."""
    v = np.asarray(v)
    if len(v) != perm.N:
        raise ValueError(f"vector length {len(v)} != N={perm.N}")
    out = np.empty_like(v)
    out[perm.table] = v
    return out


def inverse(perm: AffinePerm) -> AffinePerm:
    a_inv = gf2.inverse(perm.A)
    return AffinePerm(a_inv, gf2.matvec(a_inv, perm.b))


def compose(p1: AffinePerm, p2: AffinePerm) -> AffinePerm:
    """p1 after p2: z -> A1 (A2 z + b2) + b1."""
    return AffinePerm(gf2.matmul(p1.A, p2.A), gf2.matvec(p1.A, p2.b) ^ p1.b)


def is_lower_triangular(A: np.ndarray) -> bool:
    return not np.any(np.triu(A, k=1))


class BltaProfile:
    """Block sizes of a block-lower-triangular affine group, least-significant
    bit block first; sizes must sum to n."""

    __slots__ = ("block_sizes", "n")

    def __init__(self, block_sizes):
        sizes = tuple(int(s) for s in block_sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"block sizes must be positive, got {sizes}")
        self.block_sizes = sizes
        self.n = sum(sizes)

    def __repr__(self):
        return f"BltaProfile({list(self.block_sizes)})"

    @classmethod
    def lta(cls, n: int) -> "BltaProfile":
        return cls([1] * n)

    @classmethod
    def full(cls, n: int) -> "BltaProfile":
        return cls([n])


def sample_blta(profile: BltaProfile, rng: np.random.Generator) -> AffinePerm:
    """Uniform sample from the block-lower-triangular affine group: invertible
    diagonal blocks, zeros above them, free entries below, uniform translation."""
    n = profile.n
    A = np.zeros((n, n), dtype=np.uint8)
    start = 0
    for size in profile.block_sizes:
        A[start : start + size, start : start + size] = gf2.random_invertible(size, rng)
        if start:
            A[start : start + size, :start] = rng.integers(
                0, 2, size=(size, start), dtype=np.uint8
            )
        start += size
    b = rng.integers(0, 2, size=n, dtype=np.uint8)
    return AffinePerm(A, b)


def is_automorphism(perm, code: CodeSpec, trials: int = 32,
                    rng: np.random.Generator | None = None) -> bool:
    """Randomized re-encode test: permuted random codewords must stay codewords.

    Accepts an AffinePerm or a raw index table (any permutation of [0, N)).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    table = perm.table if isinstance(perm, AffinePerm) else np.asarray(perm)
    if rng is None:
        rng = np.random.default_rng(0)
    for _ in range(trials):
        m = rng.integers(0, 2, size=code.K, dtype=np.uint8)
        x = polar_transform(embed_message(m, code))
        xp = np.empty_like(x)
        xp[table] = x
        if not is_codeword(xp, code):
            return False
    return True


def is_automorphism_exhaustive(perm, code: CodeSpec) -> bool:
    """Check every codeword; intended for N <= 16."""
    table = perm.table if isinstance(perm, AffinePerm) else np.asarray(perm)
    for msg in range(1 << code.K):
        m = gf2.int_to_bits(msg, code.K)
        x = polar_transform(embed_message(m, code))
        xp = np.empty_like(x)
        xp[table] = x
        if not is_codeword(xp, code):
            return False
    return True


def equivalent(p1: AffinePerm, p2: AffinePerm) -> bool:
    """Coset test against the SC-absorbed lower-triangular affine subgroup:
    two permutations give identical single-attempt decoders iff p1 p2^-1 has a
    lower-triangular matrix part."""
    if p1.n != p2.n:
        raise ValueError("permutations act on different index spaces")
    return is_lower_triangular(gf2.matmul(p1.A, gf2.inverse(p2.A)))


def sample_ensemble(
    M: int,
    profile: BltaProfile,
    code: CodeSpec,
    rng: np.random.Generator,
    automorphism_trials: int = 32,
    max_rejects: int = 20000,
) -> list[AffinePerm]:
    """M pairwise-inequivalent automorphisms sampled by rejection from the
    block-lower-triangular group of the profile."""
    if M < 1:
        raise ValueError("M must be >= 1")
    perms: list[AffinePerm] = []
    rejects = 0
    while len(perms) < M:
        cand = sample_blta(profile, rng)
        ok = is_automorphism(cand, code, trials=automorphism_trials, rng=rng) and not any(
            equivalent(cand, p) for p in perms
        )
        if ok:
            perms.append(cand)
        else:
            rejects += 1
            if rejects > max_rejects:
                raise SamplingError(
                    f"could not find {M} inequivalent automorphisms for profile "
                    f"{profile.block_sizes} on {code.label()} after {rejects} rejections "
                    f"(found {len(perms)}); the available group may have too few classes"
                )
    return perms


def empirically_equivalent(
    p1: AffinePerm,
    p2: AffinePerm,
    code: CodeSpec,
    trials: int = 64,
    rng: np.random.Generator | None = None,
    noise_scale: float = 0.7,
    backend: str = "auto",
) -> bool:
    """Debug-mode equivalence check: decode shared noisy vectors through both
    single-attempt decoders and flag the pair as likely-equivalent when every
    output matches.  Intended for tests; sampling uses the coset test."""
    from .ensemble import EnsembleDecoder

    if rng is None:
        rng = np.random.default_rng(0)
    dec = EnsembleDecoder(code, [p1, p2], backend=backend)
    for _ in range(trials):
        m = rng.integers(0, 2, size=code.K, dtype=np.uint8)
        x = polar_transform(embed_message(m, code))
        llr = (1.0 - 2.0 * x) * 4.0 + rng.normal(scale=4.0 * noise_scale, size=code.N)
        a = dec.adec(llr, 0)
        b = dec.adec(llr, 1)
        if not np.array_equal(a.x_hat, b.x_hat):
            return False
    return True


def save_ensemble(perms, path) -> None:
    with open(path, "w") as fh:
        for p in perms:
            fh.write(p.to_line() + "\n")


def load_ensemble(path) -> list[AffinePerm]:
    perms = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                perms.append(AffinePerm.from_line(line))
    if not perms:
        raise ValueError(f"{path}: no permutations found")
    return perms
