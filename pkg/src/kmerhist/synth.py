"""Synthetic genomes with planted repeats and uniform-coverage reads.

Genomes are linear. Repeat blocks are random sequences copied ``m`` times
and scattered among i.i.d. filler. The table ``g_m`` (genome positions whose
k-mer occurs ``m`` times) is measured on the generated sequence by exact
counting, so block boundaries and chance repeats are accounted for.

Reads start uniformly at random, come from either strand with equal
probability, and carry independent single-base substitutions.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Iterator

import numpy as np

from .errors import ConfigurationError
from .kmers import extract_batch
from .oracle import ExactCounter, exact_histogram

ASCII = np.frombuffer(b"ACGT", dtype=np.uint8)
DEFAULT_CHUNK_READS = 50_000


@dataclass
class GenomeSpec:
    length: int
    repeat_blocks: list[tuple[int, int]] = field(default_factory=list)
    rng_seed: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise ConfigurationError("genome length must be >= 0")
        planted = 0
        for block_len, copies in self.repeat_blocks:
            if block_len < 1 or copies < 1:
                raise ConfigurationError("repeat blocks need positive length and copy number")
            planted += block_len * copies
        if planted > self.length:
            raise ConfigurationError(
                f"repeat blocks occupy {planted} bases, more than the genome length {self.length}"
            )


@dataclass
class ReadSpec:
    coverage: float
    read_length: int
    error_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.coverage < 0:
            raise ConfigurationError("coverage must be >= 0")
        if self.read_length < 1:
            raise ConfigurationError("read length must be >= 1")
        if not 0.0 <= self.error_rate < 1.0:
            raise ConfigurationError("error rate must be in [0, 1)")

    def n_reads(self, genome_length: int) -> int:
        return math.ceil(self.coverage * genome_length / self.read_length)


@dataclass
class Genome:
    codes: np.ndarray  # uint8 in {0,1,2,3}
    spec: GenomeSpec
    k: int | None = None
    canonical: bool = True
    g_m: dict[int, int] = field(default_factory=dict)

    @property
    def length(self) -> int:
        return int(self.codes.shape[0])

    @property
    def sequence(self) -> bytes:
        return ASCII[self.codes].tobytes()

    def kmer_counter(self, k: int | None = None, canonical: bool | None = None) -> ExactCounter:
        """Exact counter over the genome's own k-mers."""
        k = k or self.k
        if k is None:
            raise ConfigurationError("k is required")
        canonical = self.canonical if canonical is None else canonical
        seq = ASCII[self.codes]
        counter = ExactCounter(k, initial_capacity=max(16, 2 * self.length))
        if self.length >= k:
            codes, _ = extract_batch(seq, np.array([0]), np.array([self.length]), k, canonical)
            counter.add(codes)
        return counter

    def write_fasta(self, out: str | Path | IO[bytes], name: str = "synthetic", width: int = 80) -> None:
        seq = self.sequence
        lines = [f">{name}\n".encode()]
        lines += [seq[i : i + width] + b"\n" for i in range(0, len(seq), width)]
        _write_bytes(out, b"".join(lines))


def generate_genome(spec: GenomeSpec, k: int | None = None, canonical: bool = True) -> Genome:
    """Build the genome of ``spec``; with ``k`` also measure its ``g_m`` table."""
    rng = np.random.default_rng(spec.rng_seed)
    pieces: list[np.ndarray] = []
    for block_len, copies in spec.repeat_blocks:
        block = rng.integers(0, 4, block_len, dtype=np.uint8)
        pieces.extend([block] * copies)
    order = rng.permutation(len(pieces))
    planted = sum(p.shape[0] for p in pieces)
    filler = rng.integers(0, 4, spec.length - planted, dtype=np.uint8)
    # split the filler into len(pieces) + 1 gaps at random cut points
    cuts = np.sort(rng.integers(0, filler.shape[0] + 1, len(pieces)))
    parts: list[np.ndarray] = []
    prev = 0
    for idx, cut in zip(order, cuts):
        parts.append(filler[prev:cut])
        parts.append(pieces[idx])
        prev = cut
    parts.append(filler[prev:])
    codes = np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
    genome = Genome(codes=codes.astype(np.uint8), spec=spec, k=k, canonical=canonical)
    if k is not None:
        genome.g_m = genome_g_table(genome, k, canonical)
    return genome


def genome_g_table(genome: Genome, k: int, canonical: bool = True) -> dict[int, int]:
    """``g_m = m * |G_m|``: positions whose k-mer occurs ``m`` times in the genome."""
    hist = exact_histogram(genome.kmer_counter(k, canonical).result())
    return {m: m * int(f) for m, f in sorted(hist.counts.items())}


@dataclass
class ReadTruth:
    n: int = 0
    read_length: int = 0
    substitutions: int = 0
    reads_with_errors: int = 0

    def N(self, k: int) -> int:
        return self.n * max(0, self.read_length - k + 1)


class ReadSimulator:
    """Deterministic read generator. Iterating yields 2-D uint8 ASCII chunks.

    Every iteration restarts from the seed, so the same reads come out each
    time; :attr:`truth` is filled in as chunks are produced.
    """

    def __init__(self, genome: Genome, spec: ReadSpec, chunk_reads: int = DEFAULT_CHUNK_READS):
        if spec.read_length > genome.length:
            raise ConfigurationError(
                f"read length {spec.read_length} exceeds genome length {genome.length}"
            )
        self.genome = genome
        self.spec = spec
        self.chunk_reads = chunk_reads
        self.n = spec.n_reads(genome.length)
        self.truth = ReadTruth(n=self.n, read_length=spec.read_length)

    def __iter__(self) -> Iterator[np.ndarray]:
        spec = self.spec
        rng = np.random.default_rng(spec.rng_seed)
        l = spec.read_length
        span = self.genome.length - l + 1
        offsets = np.arange(l, dtype=np.int64)
        subs = 0
        dirty_reads = 0
        remaining = self.n
        while remaining > 0:
            m = min(self.chunk_reads, remaining)
            remaining -= m
            starts = rng.integers(0, span, m)
            reverse = rng.random(m) < 0.5
            reads = self.genome.codes[starts[:, None] + offsets]
            reads[reverse] = 3 - reads[reverse, ::-1]
            if spec.error_rate > 0:
                hit = rng.random((m, l)) < spec.error_rate
                n_hit = int(hit.sum())
                shift = rng.integers(1, 4, n_hit, dtype=np.uint8)
                reads[hit] = (reads[hit] + shift) % 4
                subs += n_hit
                dirty_reads += int(hit.any(axis=1).sum())
            yield ASCII[reads]
        self.truth.substitutions = subs
        self.truth.reads_with_errors = dirty_reads


def generate_reads(genome: Genome, spec: ReadSpec, chunk_reads: int = DEFAULT_CHUNK_READS) -> ReadSimulator:
    return ReadSimulator(genome, spec, chunk_reads)


def write_fastq(reads: ReadSimulator, out: str | Path | IO[bytes], prefix: str = "read") -> None:
    """Write every read as a 4-line FASTQ record with constant quality ``I``."""
    l = reads.spec.read_length
    qual = b"I" * l
    fh, close = _open_bytes(out)
    try:
        idx = 0
        for chunk in reads:
            lines = []
            for row in chunk:
                idx += 1
                lines.append(b"@%s%d\n%s\n+\n%s\n" % (prefix.encode(), idx, row.tobytes(), qual))
            fh.write(b"".join(lines))
    finally:
        if close:
            fh.close()


def truth_record(genome: Genome, reads: ReadSimulator | None, k: int | None) -> dict:
    """Ground-truth sidecar contents."""
    out = {
        "schema_version": 1,
        "genome": {
            "length": genome.length,
            "repeat_blocks": [list(b) for b in genome.spec.repeat_blocks],
            "rng_seed": genome.spec.rng_seed,
        },
        "k": k,
        "canonical": genome.canonical,
        "g_m": {str(m): v for m, v in sorted(genome.g_m.items())},
    }
    if reads is not None:
        l = reads.spec.read_length
        out["reads"] = asdict(reads.spec)
        out["n"] = reads.truth.n
        out["substitutions"] = reads.truth.substitutions
        out["reads_with_errors"] = reads.truth.reads_with_errors
        if k is not None:
            out["N"] = reads.truth.N(k)
            out["lambda"] = reads.spec.coverage * (l - k + 1) / l
    return out


def _open_bytes(out):
    if hasattr(out, "write"):
        return out, False
    return open(out, "wb"), True


def _write_bytes(out, data: bytes) -> None:
    fh, close = _open_bytes(out)
    try:
        fh.write(data)
    finally:
        if close:
            fh.close()


def write_truth(record: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(record, indent=2) + "\n")
