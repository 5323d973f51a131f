import numpy as np

from kmerhist.hashing import expand_seeds, hash_codes, hash_kmer, seed_keys
from kmerhist.kmers import Kmer


def test_deterministic():
    x = np.arange(1000, dtype=np.uint64)
    assert np.array_equal(hash_codes(x, 7), hash_codes(x, 7))
    assert hash_kmer(Kmer.from_string("ACGTAC"), 3) == hash_kmer(Kmer.from_string("ACGTAC"), 3)


def test_seeds_give_different_streams():
    x = np.arange(1000, dtype=np.uint64)
    a, b = hash_codes(x, 1), hash_codes(x, 2)
    assert np.mean(a == b) == 0.0
    assert seed_keys(1) != seed_keys(2)


def test_expand_seeds_distinct_and_reproducible():
    s = expand_seeds(42, 101)
    assert len(set(s)) == 101
    assert s == expand_seeds(42, 101)
    assert expand_seeds(42, 3) == s[:3]


def test_hash_kmer_matches_bulk():
    km = Kmer.from_string("ACGT" * 20)  # 3 words
    bulk = hash_codes(np.array([km.words], dtype=np.uint64), 9)
    assert hash_kmer(km, 9) == int(bulk[0])
    assert hash_kmer(5, 9) == int(hash_codes(np.array([5], dtype=np.uint64), 9)[0])


def test_avalanche():
    rng = np.random.default_rng(0)
    base = rng.integers(0, 2**63, 10_000, dtype=np.uint64) * np.uint64(2) + rng.integers(0, 2, 10_000, dtype=np.uint64)
    bits = rng.integers(0, 64, 10_000).astype(np.uint64)
    flipped = base ^ (np.uint64(1) << bits)
    diff = hash_codes(base, 17) ^ hash_codes(flipped, 17)
    ham = np.unpackbits(diff.view(np.uint8)).reshape(-1, 64).sum(axis=1)
    assert 28 <= ham.mean() <= 36


def test_trailing_zero_distribution():
    rng = np.random.default_rng(1)
    n = 1_000_000
    h = hash_codes(rng.integers(0, 4**21, n, dtype=np.uint64), 5)
    for j in range(1, 11):
        mask = np.uint64((1 << j) - 1)
        frac = np.mean((h & mask) == 0)
        p = 2.0**-j
        assert abs(frac - p) <= 3 * np.sqrt(p * (1 - p) / n), j
