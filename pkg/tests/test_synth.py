import io
import json

import numpy as np
import pytest

from kmerhist.errors import ConfigurationError
from kmerhist.kmers import batch_layout, extract_batch
from kmerhist.oracle import exact_histogram
from kmerhist.reader import parse_records
from kmerhist.synth import (
    GenomeSpec,
    ReadSpec,
    generate_genome,
    generate_reads,
    truth_record,
    write_fastq,
)


def test_random_genome_has_unique_kmers():
    g = generate_genome(GenomeSpec(1_000_000, rng_seed=1), k=21)
    positions = g.length - 21 + 1
    assert g.g_m.get(1, 0) / positions >= 0.999


def test_planted_triple_block():
    g = generate_genome(GenomeSpec(200_000, [(10_000, 3)], rng_seed=2), k=21)
    assert g.g_m[3] == pytest.approx(3 * 10_000, rel=0.01)
    assert sum(g.g_m.values()) == g.length - 21 + 1


def test_empty_genome():
    g = generate_genome(GenomeSpec(0), k=5)
    assert g.length == 0 and g.g_m == {}


def test_overfull_spec():
    with pytest.raises(ConfigurationError):
        GenomeSpec(100, [(60, 2)])
    with pytest.raises(ConfigurationError):
        ReadSpec(10, 100, 1.0)


def test_read_count_arithmetic():
    g = generate_genome(GenomeSpec(1_000_000, rng_seed=3))
    spec = ReadSpec(50, 100, 0.0, rng_seed=3)
    reads = generate_reads(g, spec)
    assert reads.n == 500_000
    assert reads.truth.N(15) == 500_000 * 86


def test_read_longer_than_genome():
    g = generate_genome(GenomeSpec(50))
    with pytest.raises(ConfigurationError):
        generate_reads(g, ReadSpec(1, 100))


def test_error_free_containment():
    g = generate_genome(GenomeSpec(50_000, [(2000, 2)], rng_seed=4), k=21)
    counter = g.kmer_counter()
    for chunk in generate_reads(g, ReadSpec(10, 100, 0.0, rng_seed=5)):
        codes, _ = extract_batch(*batch_layout(chunk), 21, True)
        assert (counter.lookup(codes) > 0).all()


def test_errors_are_substitutions():
    g = generate_genome(GenomeSpec(20_000, rng_seed=6))
    reads = generate_reads(g, ReadSpec(20, 100, 0.01, rng_seed=7))
    chunks = list(reads)
    assert reads.truth.substitutions == pytest.approx(0.01 * reads.n * 100, rel=0.1)
    assert all(c.shape[1] == 100 for c in chunks)
    assert set(np.unique(np.concatenate(chunks))) <= set(b"ACGT")


def test_seed_determinism():
    g = generate_genome(GenomeSpec(30_000, [(500, 2)], rng_seed=8))
    assert np.array_equal(g.codes, generate_genome(GenomeSpec(30_000, [(500, 2)], rng_seed=8)).codes)
    out = []
    for _ in range(2):
        buf = io.BytesIO()
        write_fastq(generate_reads(g, ReadSpec(5, 80, 0.01, rng_seed=9)), buf)
        out.append(buf.getvalue())
    assert out[0] == out[1]
    recs = list(parse_records(io.BufferedReader(io.BytesIO(out[0]))))
    assert len(recs) == generate_reads(g, ReadSpec(5, 80)).n


def test_coverage_law():
    g = generate_genome(GenomeSpec(1_000_000, rng_seed=10))
    reads = generate_reads(g, ReadSpec(20, 100, rng_seed=11))
    total = sum(c.size for c in reads)
    assert total / g.length == pytest.approx(20, rel=0.02)


def test_first_peak_near_lambda_prime():
    k, l, c = 15, 100, 50
    g = generate_genome(GenomeSpec(400_000, rng_seed=12), k=k)
    reads = generate_reads(g, ReadSpec(c, l, 0.001, rng_seed=13))
    from kmerhist.oracle import ExactCounter

    counter = ExactCounter(k)
    genome_set = g.kmer_counter()
    n_err = 0
    for chunk in reads:
        codes, _ = extract_batch(*batch_layout(chunk), k, True)
        counter.add(codes)
        n_err += int((genome_set.lookup(codes) == 0).sum())
    h = exact_histogram(counter.result())
    lam = c * (l - k + 1) / l
    assert lam == 43
    lam1 = lam * (h.total_kmers - n_err) / h.total_kmers
    dense = h.dense()
    mode = 10 + int(np.argmax(dense[10:]))
    assert abs(mode - lam1) <= 2


def test_truth_record():
    g = generate_genome(GenomeSpec(10_000, [(100, 2)], rng_seed=1), k=11)
    reads = generate_reads(g, ReadSpec(3, 50, 0.01, rng_seed=2))
    list(reads)
    rec = truth_record(g, reads, 11)
    assert rec["schema_version"] == 1 and rec["N"] == reads.n * 40
    assert json.loads(json.dumps(rec))["g_m"]["2"] >= 200
