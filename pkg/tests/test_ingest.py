import gzip

import numpy as np
import pytest

from kmerhist.errors import ConfigurationError, ParseError
from kmerhist.ingest import ingest, ingest_sequences, iter_batches
from kmerhist.oracle import exact_count
from kmerhist.sketch import SketchParams
from kmerhist.synth import GenomeSpec, ReadSpec, generate_genome, generate_reads, write_fastq


@pytest.fixture(scope="module")
def fastq(tmp_path_factory):
    path = tmp_path_factory.mktemp("ing") / "reads.fq"
    genome = generate_genome(GenomeSpec(20_000, [(1000, 3)], rng_seed=4))
    write_fastq(generate_reads(genome, ReadSpec(5.0, 100, 0.01, rng_seed=5), chunk_reads=97), path)
    return path


def params(k=21, **kw):
    return SketchParams.create(t=3, log2r=10, u=256, seed=3, k=k, **kw)


def test_worker_count_does_not_change_counters(fastq):
    ref, ref_stats = ingest([fastq], 21, params(), worker_count=1, batch_bases=5000)
    for workers in (4, 8):
        sk, stats = ingest([fastq], 21, params(), worker_count=workers, batch_bases=5000)
        assert sk.v_census_equal(ref)
        assert sk.estimate_histogram(50).counts == ref.estimate_histogram(50).counts
        assert stats.N == ref_stats.N and stats.n == ref_stats.n


def test_window_arithmetic(fastq):
    sk, stats = ingest([fastq], 21, params())
    assert stats.n == 1000 and stats.l == 100
    assert stats.N == 1000 * 80 - stats.skipped == sk.total_updates


def test_skipped_windows_counted(tmp_path):
    path = tmp_path / "n.fa"
    path.write_bytes(b">a\nACGTNACGTACG\n")
    sk, stats = ingest([path], 4, params(k=4))
    # 9 windows; those starting at 1..4 contain the N
    assert stats.skipped == 4 and stats.N == 5


def test_empty_file(tmp_path):
    path = tmp_path / "empty.fq"
    path.write_bytes(b"")
    sk, stats = ingest([path], 21, params())
    assert sk.total_updates == 0 and stats.N == 0 and sk.estimate_f0() == 0


def test_gzip_and_plain_agree(fastq, tmp_path):
    gz = tmp_path / "reads.fq.gz"
    gz.write_bytes(gzip.compress(fastq.read_bytes()))
    a, _ = ingest([fastq], 21, params())
    b, _ = ingest([gz], 21, params())
    assert a.state_equal(b)


def test_parse_error_propagates_from_workers(tmp_path):
    path = tmp_path / "bad.fq"
    path.write_bytes(b"@r\nACGTACGTACGTACGTACGTACGT\n+\nIII\n")
    with pytest.raises(ParseError, match="bad.fq"):
        ingest([path], 21, params(), worker_count=4)


def test_k_mismatch():
    with pytest.raises(ConfigurationError):
        ingest_sequences([b"ACGT"], params(k=21), k=15)
    with pytest.raises(ConfigurationError):
        ingest_sequences([b"ACGT"], params(k=3), canonical=False)


def test_sketch_total_matches_oracle(fastq):
    sk, stats = ingest([fastq], 21, params())
    from kmerhist.ingest import stream_kmer_codes

    exact = exact_count(stream_kmer_codes([fastq], 21), k=21)
    assert exact.N == sk.total_updates


def test_read_arrays_equal_sequences():
    rng = np.random.default_rng(0)
    arr = np.frombuffer(b"ACGT", dtype=np.uint8)[rng.integers(0, 4, (50, 60))]
    a, _ = ingest_sequences([row.tobytes() for row in arr], params())
    from kmerhist.ingest import ingest_batches

    b, _ = ingest_batches([arr], params())
    assert a.state_equal(b)


def test_iter_batches_respects_size(fastq):
    sizes = [sum(map(len, b)) for b in iter_batches([fastq], batch_bases=1000)]
    assert all(s >= 1000 for s in sizes[:-1]) and sum(sizes) == 100_000
