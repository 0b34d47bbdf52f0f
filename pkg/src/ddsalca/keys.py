"""Integer keys for fixed-length symbol strings.

A string ``s_0 ... s_{L-1}`` is mapped to ``sum_j d_j * base**(L-1-j) mod 2**64``
with digit ``d_j = s_j + OFFSET``. When ``base**L < 2**63`` the map is exact
(injective); otherwise a large odd base turns it into a 64-bit polynomial hash.
The same arithmetic is used for numpy batches and single Python tuples, so a
runtime lookup always agrees with the keys computed while building.
"""
from __future__ import annotations

import numpy as np

OFFSET = 3  # ABS=-2 -> 1, PAD=-1 -> 2, symbol 0 -> 3
MASK = (1 << 64) - 1
HASH_BASE = 0x9E3779B97F4A7C15 | 1


class KeyCodec:
    def __init__(self, n_outputs: int, n_inputs: int, length: int, base: int | None = None):
        self.length = int(length)
        radix = max(n_outputs, n_inputs) + OFFSET
        if base is None:
            base = radix if radix ** self.length < 2 ** 63 else HASH_BASE
        self.base = int(base)
        # exact only when the digits fit the base and no wraparound can occur
        self.exact = self.base == radix and radix ** self.length < 2 ** 63
        self.radix = radix

    def with_length(self, length: int) -> "KeyCodec":
        """Codec for another length sharing this base (so rolling keys stay consistent)."""
        c = KeyCodec(self.radix - OFFSET, 0, length, base=self.base)
        return c

    def key(self, symbols) -> int:
        if len(symbols) != self.length:
            raise ValueError(f"expected {self.length} symbols, got {len(symbols)}")
        h = 0
        for s in symbols:
            h = (h * self.base + int(s) + OFFSET) & MASK
        return h

    def __eq__(self, other):
        return isinstance(other, KeyCodec) and (self.length, self.base) == (other.length, other.base)

    def __repr__(self):
        mode = "exact" if self.exact else "hash"
        return f"KeyCodec(length={self.length}, base={self.base}, {mode})"


def prefix_hashes(seq: np.ndarray, base: int) -> np.ndarray:
    """Rolling prefix values: ``P[:, j]`` is the key of ``seq[:, :j]``."""
    n, L = seq.shape
    P = np.zeros((n, L + 1), dtype=np.uint64)
    b = np.uint64(base)
    digits = (seq.astype(np.int64) + OFFSET).astype(np.uint64)
    for j in range(L):
        P[:, j + 1] = P[:, j] * b + digits[:, j]
    return P


def substring_keys(P: np.ndarray, starts, length: int, base: int) -> np.ndarray:
    """Keys of ``seq[:, a:a+length]`` for each ``a`` in ``starts``; shape (n, len(starts))."""
    starts = np.asarray(starts, dtype=np.int64)
    power = np.uint64(pow(base, length, 1 << 64))
    return P[:, starts + length] - P[:, starts] * power


def padded_sequences(outputs: np.ndarray, inputs: np.ndarray, pad_steps: int) -> np.ndarray:
    """Interleave ``y0 u0 y1 ... y_H`` row-wise and prepend ``pad_steps`` padding pairs."""
    from .behavior import PAD

    n, H1 = outputs.shape
    H = H1 - 1
    seq = np.full((n, 2 * pad_steps + 2 * H + 1), PAD, dtype=np.int16)
    seq[:, 2 * pad_steps::2] = outputs
    if H:
        seq[:, 2 * pad_steps + 1::2] = inputs
    return seq
