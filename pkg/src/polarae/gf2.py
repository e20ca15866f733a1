"""Small dense GF(2) linear algebra on uint8 numpy arrays."""

import numpy as np


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.uint8)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over GF(2)."""
    return (a.astype(np.uint16) @ b.astype(np.uint16) & 1).astype(np.uint8)


def matvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (a.astype(np.uint16) @ v.astype(np.uint16) & 1).astype(np.uint8)


def inverse(a: np.ndarray) -> np.ndarray:
    """Invert via Gauss-Jordan elimination; raises ValueError if singular."""
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    aug = np.concatenate([a.astype(np.uint8) & 1, identity(n)], axis=1)
    for col in range(n):
        pivot = None
        for row in range(col, n):
            if aug[row, col]:
                pivot = row
                break
        if pivot is None:
            raise ValueError("matrix is singular over GF(2)")
        if pivot != col:
            aug[[col, pivot]] = aug[[pivot, col]]
        mask = aug[:, col].copy()
        mask[col] = 0
        aug[mask == 1] ^= aug[col]
    return aug[:, n:].copy()


def is_invertible(a: np.ndarray) -> bool:
    try:
        inverse(a)
    except ValueError:
        return False
    return True


def random_invertible(n: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample a uniform invertible n x n matrix over GF(2)."""
    while True:
        a = rng.integers(0, 2, size=(n, n), dtype=np.uint8)
        if is_invertible(a):
            return a


def int_to_bits(x: int, n: int) -> np.ndarray:
    """LSB-first bit vector of x, length n."""
    return ((x >> np.arange(n)) & 1).astype(np.uint8)


def bits_to_int(bits: np.ndarray) -> int:
    return int(np.dot(bits.astype(np.int64), 1 << np.arange(len(bits))))
