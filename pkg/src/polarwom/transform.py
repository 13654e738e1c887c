"""The length-n binary transform x = u * G_n over GF(2) and its inverse.

G_n is the log2(n)-fold Kronecker power of [[1,0],[1,1]] in the plain block
ordering: no bit-reversal permutation is applied, so index i of the input
means row i of the recursively defined matrix.  The transform is an
involution (G_n^-1 = G_n).
"""

from __future__ import annotations

import numpy as np


def _check_block(u) -> np.ndarray:
    u = np.asarray(u)
    n = u.shape[-1]
    if n == 0 or (n & (n - 1)) != 0:
        raise ValueError(f"block length {n} is not a power of 2")
    if not np.all((u == 0) | (u == 1)):
        raise ValueError("block entries must be 0/1")
    return u.astype(np.uint8)


def polar_transform(u) -> np.ndarray:
    """Compute u * G_n on the last axis; O(n log n) XORs, batch-friendly."""
    x = _check_block(u).copy()
    n = x.shape[-1]
    length = n
    while length >= 2:
        half = length // 2
        # contiguous blocks of `length` entries; each folds its second half
        # into its first, then the two halves recurse independently
        view = x.reshape(-1, length)
        view[:, :half] ^= view[:, half:]
        length = half
    return x


def polar_inverse(x) -> np.ndarray:
    """Inverse transform; identical computation since G_n is an involution."""
    return polar_transform(x)
