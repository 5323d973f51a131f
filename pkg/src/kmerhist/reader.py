"""Streaming FASTA/FASTQ reader with gzip sniffing.

Records are produced one at a time from a buffered binary stream; nothing
beyond the current record is held in memory. Byte offsets in parse errors
refer to the decompressed stream.
"""

from __future__ import annotations

import gzip
import io
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

from .errors import ParseError

GZIP_MAGIC = b"\x1f\x8b"


@dataclass
class SequenceRecord:
    id: str
    bases: bytes
    quality: bytes | None = None

    def __post_init__(self):
        if self.quality is not None and len(self.quality) != len(self.bases):
            raise ValueError("quality length differs from sequence length")


@contextmanager
def open_input(path: str | Path, compression: str = "auto"):
    """Yield a buffered binary stream for ``path`` ("-" is standard input)."""
    if str(path) == "-":
        raw = sys.stdin.buffer
        close = False
    else:
        raw = open(path, "rb")
        close = True
    try:
        yield _decompressed(raw, compression)
    finally:
        if close:
            raw.close()


def _decompressed(raw: BinaryIO, compression: str) -> io.BufferedReader:
    if compression not in ("auto", "none", "gzip"):
        raise ValueError(f"unknown compression {compression!r}")
    buffered = raw if hasattr(raw, "peek") else io.BufferedReader(raw)
    if compression == "gzip" or (compression == "auto" and buffered.peek(2)[:2] == GZIP_MAGIC):
        return io.BufferedReader(gzip.GzipFile(fileobj=buffered), buffer_size=1 << 20)
    return buffered


def parse_records(
    stream: BinaryIO | str | Path,
    format: str = "auto",
    compression: str = "auto",
    source: str | None = None,
) -> Iterator[SequenceRecord]:
    """Iterate over the records of a FASTA or FASTQ stream.

    ``stream`` may be a path, "-" for stdin, or an open binary file object.
    """
    if isinstance(stream, (str, Path)):
        with open_input(stream, compression) as fh:
            yield from parse_records(fh, format, "none", source or str(stream))
        return
    fh = _decompressed(stream, compression) if compression != "none" or not hasattr(stream, "peek") else stream
    if format not in ("auto", "fasta", "fastq"):
        raise ValueError(f"unknown format {format!r}")
    first = fh.peek(1)[:1]
    if not first:
        return
    if format == "auto":
        if first == b">":
            format = "fasta"
        elif first == b"@":
            format = "fastq"
        else:
            raise ParseError(f"cannot detect format from first byte {first!r}", 0, source)
    if format == "fasta":
        yield from _parse_fasta(fh, source)
    else:
        yield from _parse_fastq(fh, source)


def _header_id(line: bytes, offset: int, source: str | None) -> str:
    name = line[1:].strip()
    if not name:
        raise ParseError("record has an empty id", offset, source)
    return name.split()[0].decode("ascii", "replace")


def _parse_fasta(fh: BinaryIO, source: str | None) -> Iterator[SequenceRecord]:
    offset = 0
    rec_id: str | None = None
    chunks: list[bytes] = []
    for line in fh:
        start = offset
        offset += len(line)
        if line.startswith(b">"):
            if rec_id is not None:
                yield SequenceRecord(rec_id, b"".join(chunks))
            rec_id = _header_id(line, start, source)
            chunks = []
        elif rec_id is None:
            if line.strip():
                raise ParseError("sequence data before the first '>' header", start, source)
        else:
            chunks.append(line.rstrip(b"\r\n"))
    if rec_id is not None:
        yield SequenceRecord(rec_id, b"".join(chunks))


def _parse_fastq(fh: BinaryIO, source: str | None) -> Iterator[SequenceRecord]:
    offset = 0
    readline = fh.readline
    while True:
        start = offset
        header = readline()
        if not header:
            return
        offset += len(header)
        if header in (b"\n", b"\r\n"):
            continue
        if not header.startswith(b"@"):
            raise ParseError("expected '@' at start of FASTQ record", start, source)
        rec_id = _header_id(header, start, source)
        seq = readline()
        plus = readline()
        qual = readline()
        offset += len(seq) + len(plus) + len(qual)
        if not plus.startswith(b"+"):
            if not plus:
                raise ParseError("truncated FASTQ record", start, source)
            raise ParseError("expected '+' separator line", start, source)
        seq = seq.rstrip(b"\r\n")
        qual = qual.rstrip(b"\r\n")
        if len(qual) != len(seq):
            raise ParseError(
                f"quality length {len(qual)} differs from sequence length {len(seq)}", start, source
            )
        yield SequenceRecord(rec_id, seq, qual)


def read_sequences(path: str | Path, format: str = "auto", compression: str = "auto") -> list[bytes]:
    """All sequences of a file as a list (convenience for small inputs)."""
    return [rec.bases for rec in parse_records(path, format, compression)]
