"""Parallel ingestion of read files into a sketch.

Whole records are grouped into batches and handed to workers. Each worker
owns a private sketch built from the same parameters and the driver merges
them at the end, so the counter values of the result do not depend on the
number of workers or on how records were distributed.
"""

from __future__ import annotations

import queue
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .kmers import MAX_K, batch_layout, extract_batch
from .reader import parse_records
from .sketch import AbundanceSketch, SketchParams, merge_all

DEFAULT_BATCH_BASES = 4 << 20


@dataclass
class StreamStats:
    n: int = 0
    N: int = 0
    skipped: int = 0
    length_counts: Counter = field(default_factory=Counter)
    bases: int = 0

    @property
    def l(self) -> int | None:
        """Read length when every read has the same length, else ``None``."""
        if len(self.length_counts) == 1:
            return next(iter(self.length_counts))
        return None

    @property
    def mean_length(self) -> float:
        return self.bases / self.n if self.n else 0.0

    def add_lengths(self, lengths: np.ndarray) -> None:
        values, freq = np.unique(np.asarray(lengths, dtype=np.int64), return_counts=True)
        for x, c in zip(values.tolist(), freq.tolist()):
            self.length_counts[x] += c
            self.n += c
            self.bases += x * c

    def merge(self, other: "StreamStats") -> None:
        self.n += other.n
        self.N += other.N
        self.skipped += other.skipped
        self.bases += other.bases
        self.length_counts.update(other.length_counts)

    def to_json_dict(self) -> dict:
        return {
            "reads": self.n,
            "kmers": self.N,
            "skipped": self.skipped,
            "bases": self.bases,
            "read_length": self.l,
        }


def iter_batches(
    paths: Sequence[str | Path], batch_bases: int = DEFAULT_BATCH_BASES, format: str = "auto"
) -> Iterable[list[bytes]]:
    """Group the sequences of ``paths`` into lists of roughly ``batch_bases`` bases."""
    batch: list[bytes] = []
    size = 0
    for path in paths:
        for rec in parse_records(path, format=format):
            batch.append(rec.bases)
            size += len(rec.bases)
            if size >= batch_bases:
                yield batch
                batch, size = [], 0
    if batch:
        yield batch


def _sketch_batch(sketch: AbundanceSketch, seqs, k: int, canonical: bool, stats: StreamStats) -> None:
    buf, starts, ends = batch_layout(seqs)
    codes, skipped = extract_batch(buf, starts, ends, k, canonical)
    stats.add_lengths(ends - starts)
    stats.N += codes.shape[0]
    stats.skipped += skipped
    if codes.shape[0]:
        sketch.update_codes(codes)


def _resolve(params: SketchParams, k: int | None, canonical: bool | None) -> tuple[int, bool]:
    if k is None:
        k = params.k
    if not 1 <= k <= MAX_K:
        raise ConfigurationError(f"k must be in [1, {MAX_K}], got {k}")
    if params.k and params.k != k:
        raise ConfigurationError(f"k={k} does not match the sketch parameters (k={params.k})")
    if canonical is None:
        canonical = params.canonical
    if canonical != params.canonical:
        raise ConfigurationError("canonical flag does not match the sketch parameters")
    return k, canonical


def ingest_batches(
    batches: Iterable[list[bytes]],
    params: SketchParams,
    k: int | None = None,
    canonical: bool | None = None,
    worker_count: int = 1,
) -> tuple[AbundanceSketch, StreamStats]:
    """Sketch an iterable of batches with ``worker_count`` threads.

    A batch is a list of sequences or a 2-D uint8 array of equal-length reads.
    """
    k, canonical = _resolve(params, k, canonical)
    if worker_count < 1:
        raise ConfigurationError("worker_count must be >= 1")
    if worker_count == 1:
        sketch = AbundanceSketch.new(params)
        stats = StreamStats()
        for batch in batches:
            _sketch_batch(sketch, batch, k, canonical, stats)
        return sketch, stats

    work: queue.Queue = queue.Queue(maxsize=2 * worker_count)
    sketches = [AbundanceSketch.new(params) for _ in range(worker_count)]
    all_stats = [StreamStats() for _ in range(worker_count)]
    errors: list[BaseException] = []

    def worker(idx: int) -> None:
        while True:
            batch = work.get()
            if batch is None:
                return
            if errors:
                continue
            try:
                _sketch_batch(sketches[idx], batch, k, canonical, all_stats[idx])
            except BaseException as exc:  # surfaced in the driver
                errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,), daemon=True) for i in range(worker_count)]
    for th in threads:
        th.start()
    try:
        for batch in batches:
            if errors:
                break
            work.put(batch)
    finally:
        for _ in threads:
            work.put(None)
        for th in threads:
            th.join()
    if errors:
        raise errors[0]
    stats = StreamStats()
    for s in all_stats:
        stats.merge(s)
    return merge_all(sketches), stats


def ingest(
    paths: Sequence[str | Path],
    k: int | None,
    params: SketchParams,
    canonical: bool | None = None,
    worker_count: int = 1,
    batch_bases: int = DEFAULT_BATCH_BASES,
    format: str = "auto",
) -> tuple[AbundanceSketch, StreamStats]:
    """Sketch every k-mer of every record in ``paths`` ("-" reads stdin)."""
    return ingest_batches(iter_batches(paths, batch_bases, format), params, k, canonical, worker_count)


def ingest_sequences(
    seqs: Sequence[bytes],
    params: SketchParams,
    k: int | None = None,
    canonical: bool | None = None,
    worker_count: int = 1,
    batch_bases: int = DEFAULT_BATCH_BASES,
) -> tuple[AbundanceSketch, StreamStats]:
    """In-memory counterpart of :func:`ingest`."""

    def batches():
        batch: list[bytes] = []
        size = 0
        for s in seqs:
            batch.append(s)
            size += len(s)
            if size >= batch_bases:
                yield batch
                batch, size = [], 0
        if batch:
            yield batch

    return ingest_batches(batches(), params, k, canonical, worker_count)


def stream_kmer_codes(
    paths: Sequence[str | Path], k: int, canonical: bool = True, batch_bases: int = DEFAULT_BATCH_BASES
) -> Iterable[np.ndarray]:
    """Packed k-mer arrays, one per batch, for exact counting."""
    for batch in iter_batches(paths, batch_bases):
        codes, _ = extract_batch(*batch_layout(batch), k, canonical)
        yield codes
