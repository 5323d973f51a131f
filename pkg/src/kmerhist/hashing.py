"""Seeded 64-bit hashing of packed k-mers and integer items.

Each sketch instance owns one 64-bit seed. The seed is expanded (splitmix64)
into two whitening keys and an item ``x`` is hashed as
``fmix64(fmix64(x ^ a) ^ b)``, where ``fmix64`` is the MurmurHash3 finalizer.
Multi-word k-mers (k > 32) are folded word by word before the final round.

All arithmetic stays in uint64; numba promotes mixed int64/uint64 to float64,
so every constant below is an explicit ``np.uint64``.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_U64 = np.uint64
_C1 = _U64(0xFF51AFD7ED558CCD)
_C2 = _U64(0xC4CEB9FE1A85EC53)
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_SM1 = _U64(0xBF58476D1CE4E5B9)
_SM2 = _U64(0x94D049BB133111EB)
_S33 = _U64(33)
_S30 = _U64(30)
_S27 = _U64(27)
_S31 = _U64(31)
_S58 = _U64(58)
_ONE = _U64(1)
_ZERO = _U64(0)
MASK64 = (1 << 64) - 1

# de Bruijn table for count-trailing-zeros of an isolated low bit
_DEBRUIJN = _U64(0x03F79D71B4CB0A89)
_CTZ_TABLE = np.zeros(64, dtype=np.int64)
for _i in range(64):
    _CTZ_TABLE[((((1 << _i) * 0x03F79D71B4CB0A89) & MASK64) >> 58)] = _i


@nb.njit(inline="always")
def fmix64(h):
    h ^= h >> _S33
    h *= _C1
    h ^= h >> _S33
    h *= _C2
    h ^= h >> _S33
    return h


@nb.njit(inline="always")
def splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> _S30)) * _SM1
    z = (z ^ (z >> _S27)) * _SM2
    return z ^ (z >> _S31)


@nb.njit(inline="always")
def ctz64(z):
    """Trailing zero count of a non-zero uint64."""
    low = z & (~z + _ONE)
    return _CTZ_TABLE[np.int64((low * _DEBRUIJN) >> _S58)]


@nb.njit(inline="always")
def hash_word_keyed(x, a, b):
    return fmix64(fmix64(x ^ a) ^ b)


@nb.njit(inline="always")
def hash_row_keyed(row, a, b):
    """Hash a multi-word packed k-mer (most significant word first)."""
    h = a
    for i in range(row.shape[0]):
        h = fmix64(h ^ fmix64(row[i] + b))
    return fmix64(h ^ b)


def seed_keys(seed: int) -> tuple[int, int]:
    """Expand one 64-bit seed into the two whitening keys used by the hash."""
    s = int(seed) & MASK64
    a = _splitmix_py(s)
    b = _splitmix_py((s + 0x632BE59BD9B4E019) & MASK64)
    return a, b


def _splitmix_py(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def expand_seeds(master_seed: int, count: int) -> list[int]:
    """Derive ``count`` pairwise-distinct instance seeds from a master seed."""
    seeds: list[int] = []
    state = int(master_seed) & MASK64
    while len(seeds) < count:
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        candidate = _splitmix_py(state)
        if candidate not in seeds:
            seeds.append(candidate)
    return seeds


@nb.njit(nogil=True, cache=True)
def _hash_words_kernel(words, a, b, out):
    n = words.shape[0]
    if words.shape[1] == 1:
        for i in range(n):
            out[i] = hash_word_keyed(words[i, 0], a, b)
    else:
        for i in range(n):
            out[i] = hash_row_keyed(words[i], a, b)


def hash_codes(codes: np.ndarray, seed: int) -> np.ndarray:
    """Hash an array of packed k-mers / items under one seed.

    ``codes`` is either 1-D uint64 (one word per item) or 2-D ``(n, words)``.
    """
    arr = np.asarray(codes, dtype=np.uint64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    a, b = seed_keys(seed)
    out = np.empty(arr.shape[0], dtype=np.uint64)
    _hash_words_kernel(np.ascontiguousarray(arr), np.uint64(a), np.uint64(b), out)
    return out


def hash_kmer(kmer, seed: int) -> int:
    """Hash one :class:`~kmerhist.kmers.Kmer` (or a raw uint64 item)."""
    words = getattr(kmer, "words", None)
    if words is None:
        words = (int(kmer),)
    return int(hash_codes(np.array([words], dtype=np.uint64), seed)[0])
