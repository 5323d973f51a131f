import math

import numpy as np
import pytest

from kmerhist.errors import CapacityError, ConfigurationError
from kmerhist.histogram import AbundanceHistogram
from kmerhist.kmers import Kmer
from kmerhist.oracle import ExactCounter, compare, exact_count, exact_histogram, relative_error


def test_small_stream():
    x, y = Kmer.from_string("ACG"), Kmer.from_string("TTA")
    counts = exact_count([x, y, x])
    assert counts.table == {x: 2, y: 1} and counts.N == 3
    h = exact_histogram(counts)
    assert h.counts == {1: 1, 2: 1} and h.f0 == 2 and h.source == "exact"


def test_single_kmer_five_times():
    x = Kmer.from_string("ACGTT")
    h = exact_histogram(exact_count([x] * 5))
    assert h.counts == {5: 1}


def test_partition_identities_random():
    rng = np.random.default_rng(0)
    for words in (1, 2, 4):
        codes = rng.integers(0, 300, (20_000, words)).astype(np.uint64)
        h = exact_histogram(exact_count(codes, k=32 * words))
        assert h.check_exact_identities()
        assert h.f0 == len(np.unique(codes, axis=0))


def test_growth_and_lookup():
    rng = np.random.default_rng(1)
    codes = rng.integers(0, 2**62, 100_000, dtype=np.uint64)
    c = ExactCounter(31, initial_capacity=16)
    c.add(codes[:50_000])
    c.add(codes)
    res = c.result()
    assert res.f0 == len(np.unique(codes))
    assert c.lookup(codes[:10]).tolist() == [2] * 10
    assert c.lookup(np.array([7], dtype=np.uint64)).tolist() == [0] or 7 in codes


def test_weighted_add():
    c = ExactCounter(5)
    c.add(np.array([1, 2], dtype=np.uint64), np.array([3, 4]))
    assert c.result().N == 7 and sorted(c.result().counts.tolist()) == [3, 4]


def test_capacity_error():
    with pytest.raises(CapacityError):
        exact_count(np.arange(1000, dtype=np.uint64), k=31, max_distinct=999)
    exact_count(np.arange(1000, dtype=np.uint64), k=31, max_distinct=1000)


def test_word_mismatch():
    with pytest.raises(ConfigurationError):
        ExactCounter(40).add(np.zeros(3, dtype=np.uint64))


def test_get():
    counts = exact_count([Kmer.from_string("AC")] * 3)
    assert counts.get(Kmer.from_string("AC")) == 3
    assert counts.get(Kmer.from_string("GG")) == 0


# ---- compare --------------------------------------------------------------


def test_compare_identical():
    h = AbundanceHistogram(f0=3, counts={1: 2, 2: 1}, total_kmers=4, source="exact")
    rep = compare(AbundanceHistogram(f0=3.0, counts={1: 2.0, 2: 1.0}, total_kmers=4), h)
    assert all(st.mean == 0 for st in rep.stats.values())


def test_compare_definition():
    exact = AbundanceHistogram(f0=200, counts={1: 100, 3: 100}, total_kmers=400, source="exact")
    est = AbundanceHistogram(f0=200.0, counts={1: 102.0, 3: 100.0}, total_kmers=400)
    rep = compare(est, exact)
    assert rep.error("f1") == pytest.approx(0.02)
    assert "f2" in rep.excluded
    assert rep.stats["f1"].lam == 2


def test_compare_requires_exact():
    h = AbundanceHistogram(f0=1.0, counts={1: 1.0})
    with pytest.raises(ConfigurationError):
        compare(h, h)


def test_relative_error_zero_truth():
    assert relative_error(3, 0) is None


def test_lambda_grouping_trend():
    # errors planted to grow with lambda
    exact = AbundanceHistogram(f0=1000, counts={1: 500, 2: 250, 3: 125, 4: 125}, total_kmers=0, source="exact")
    est = AbundanceHistogram(f0=1000.0, counts={1: 505.0, 2: 255.0, 3: 130.0, 4: 135.0})
    groups = compare(est, exact).by_lambda()
    means = [g["mean"] for g in groups.values()]
    assert means == sorted(means)
    js = compare([est, est], exact).to_json_dict()
    assert js["schema_version"] == 1 and js["trials"] == 2
