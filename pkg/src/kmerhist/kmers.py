"""2-bit k-mer packing, canonical form, and window extraction.

A k-mer is packed as one ``2k``-bit integer (A=00, C=01, G=10, T=11, first
base most significant) split into 64-bit words, most significant word first.
The leading word holds ``k - 32 * (words - 1)`` bases; its unused high bits
are zero. Word-wise comparison of two packings is therefore lexicographic
comparison of the base strings, which makes the canonical form a simple
``min(forward, reverse_complement)``.

:class:`Kmer` and :func:`extract_kmers` are the readable per-record API. The
``*_batch`` functions run the same extraction over many records at once in
compiled code and are what ingestion uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numba as nb
import numpy as np

MAX_K = 1024
_BASES = "ACGT"
_CODE = {"A": 0, "C": 1, "G": 2, "T": 3, "a": 0, "c": 1, "g": 2, "t": 3}

# byte -> 2-bit code, 4 for anything that is not ACGT/acgt
BASE_LUT = np.full(256, 4, dtype=np.uint8)
for _ch, _code in _CODE.items():
    BASE_LUT[ord(_ch)] = _code


def n_words(k: int) -> int:
    return (k + 31) // 32


@dataclass(frozen=True)
class Kmer:
    k: int
    words: tuple[int, ...]

    @classmethod
    def from_value(cls, value: int, k: int) -> "Kmer":
        w = n_words(k)
        return cls(k, tuple((value >> (64 * (w - 1 - i))) & ((1 << 64) - 1) for i in range(w)))

    @classmethod
    def from_string(cls, s: str) -> "Kmer":
        k = len(s)
        if not 1 <= k <= MAX_K:
            raise ValueError(f"k must be in [1, {MAX_K}], got {k}")
        value = 0
        for ch in s:
            try:
                value = (value << 2) | _CODE[ch]
            except KeyError:
                raise ValueError(f"non-ACGT base {ch!r} in k-mer") from None
        return cls.from_value(value, k)

    @property
    def value(self) -> int:
        v = 0
        for w in self.words:
            v = (v << 64) | w
        return v

    def to_string(self) -> str:
        v = self.value
        return "".join(_BASES[(v >> (2 * (self.k - 1 - i))) & 3] for i in range(self.k))

    def reverse_complement(self) -> "Kmer":
        v = self.value
        out = 0
        for _ in range(self.k):
            out = (out << 2) | (3 - (v & 3))
            v >>= 2
        return Kmer.from_value(out, self.k)

    def canonical(self) -> "Kmer":
        rc = self.reverse_complement()
        return rc if rc.words < self.words else self

    def __str__(self) -> str:
        return self.to_string()


def encode(s: str) -> Kmer:
    return Kmer.from_string(s)


def decode(kmer: Kmer) -> str:
    return kmer.to_string()


def reverse_complement(s: str) -> str:
    comp = {"A": "T", "C": "G", "G": "C", "T": "A"}
    return "".join(comp[ch] for ch in reversed(s.upper()))


def canonical_string(s: str) -> str:
    return Kmer.from_string(s.upper()).canonical().to_string()


def extract_kmers(record, k: int, canonical: bool = True, stats=None) -> Iterator[Kmer]:
    """Yield one k-mer per window of ``record`` that contains only ACGT.

    ``record`` is a :class:`~kmerhist.reader.SequenceRecord`, ``bytes`` or
    ``str``. Skipped windows are tallied on ``stats`` (a ``StreamStats``)
    when given.
    """
    if k < 1 or k > MAX_K:
        raise ValueError(f"k must be in [1, {MAX_K}], got {k}")
    seq = getattr(record, "bases", record)
    if isinstance(seq, (bytes, bytearray)):
        seq = seq.decode("ascii")
    skipped = 0
    emitted = 0
    for pos in range(len(seq) - k + 1):
        window = seq[pos : pos + k]
        try:
            km = Kmer.from_string(window)
        except ValueError:
            skipped += 1
            continue
        emitted += 1
        yield km.canonical() if canonical else km
    if stats is not None:
        stats.skipped += skipped
        stats.N += emitted


# --------------------------------------------------------------------------
# batch extraction (compiled)
# --------------------------------------------------------------------------


@nb.njit(nogil=True, cache=True)
def _windows_upper_bound(starts, ends, k):
    total = 0
    for r in range(starts.shape[0]):
        n = ends[r] - starts[r] - k + 1
        if n > 0:
            total += n
    return total


@nb.njit(nogil=True, cache=True)
def _extract_single(buf, starts, ends, k, canonical, lut, out):
    """k <= 32: returns (emitted, skipped)."""
    if k == 32:
        mask = ~np.uint64(0)
    else:
        mask = (np.uint64(1) << np.uint64(2 * k)) - np.uint64(1)
    top = np.uint64(2 * (k - 1))
    two = np.uint64(2)
    three = np.uint64(3)
    n = 0
    skipped = 0
    for r in range(starts.shape[0]):
        s = starts[r]
        e = ends[r]
        fwd = np.uint64(0)
        rev = np.uint64(0)
        run = 0
        for pos in range(s, e):
            code = lut[buf[pos]]
            if code > 3:
                run = 0
                fwd = np.uint64(0)
                rev = np.uint64(0)
            else:
                cc = np.uint64(code)
                fwd = ((fwd << two) | cc) & mask
                rev = (rev >> two) | ((three - cc) << top)
                run += 1
            if pos - s + 1 >= k:
                if run >= k:
                    if canonical and rev < fwd:
                        out[n, 0] = rev
                    else:
                        out[n, 0] = fwd
                    n += 1
                else:
                    skipped += 1
    return n, skipped


@nb.njit(nogil=True, cache=True)
def _extract_multi(buf, starts, ends, k, canonical, lut, out):
    """k > 32: rolling multi-word shift registers. Returns (emitted, skipped)."""
    W = out.shape[1]
    lead_bases = k - 32 * (W - 1)
    if lead_bases == 32:
        lead_mask = ~np.uint64(0)
    else:
        lead_mask = (np.uint64(1) << np.uint64(2 * lead_bases)) - np.uint64(1)
    lead_top = np.uint64(2 * (lead_bases - 1))
    two = np.uint64(2)
    three = np.uint64(3)
    s62 = np.uint64(62)
    fwd = np.zeros(W, dtype=np.uint64)
    rev = np.zeros(W, dtype=np.uint64)
    n = 0
    skipped = 0
    for r in range(starts.shape[0]):
        s = starts[r]
        e = ends[r]
        fwd[:] = 0
        rev[:] = 0
        run = 0
        for pos in range(s, e):
            code = lut[buf[pos]]
            if code > 3:
                run = 0
                fwd[:] = 0
                rev[:] = 0
            else:
                cc = np.uint64(code)
                # forward: shift the whole register left by one base
                for wi in range(W - 1):
                    fwd[wi] = (fwd[wi] << two) | (fwd[wi + 1] >> s62)
                fwd[W - 1] = (fwd[W - 1] << two) | cc
                fwd[0] &= lead_mask
                # reverse complement: shift right, new base enters at the top
                for wi in range(W - 1, 0, -1):
                    rev[wi] = (rev[wi] >> two) | ((rev[wi - 1] & three) << s62)
                rev[0] = (rev[0] >> two) | ((three - cc) << lead_top)
                run += 1
            if pos - s + 1 >= k:
                if run >= k:
                    use_rev = False
                    if canonical:
                        for wi in range(W):
                            if rev[wi] != fwd[wi]:
                                use_rev = rev[wi] < fwd[wi]
                                break
                    if use_rev:
                        out[n, :] = rev
                    else:
                        out[n, :] = fwd
                    n += 1
                else:
                    skipped += 1
    return n, skipped


def extract_batch(buf: np.ndarray, starts: np.ndarray, ends: np.ndarray, k: int, canonical: bool = True):
    """Extract k-mers from many records laid out in one byte buffer.

    Record ``r`` occupies ``buf[starts[r]:ends[r]]``. Returns
    ``(codes, skipped)`` where ``codes`` is uint64 of shape ``(n, words)``.
    """
    if k < 1 or k > MAX_K:
        raise ValueError(f"k must be in [1, {MAX_K}], got {k}")
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    ends = np.ascontiguousarray(ends, dtype=np.int64)
    cap = _windows_upper_bound(starts, ends, k)
    W = n_words(k)
    out = np.empty((cap, W), dtype=np.uint64)
    if cap == 0:
        return out, 0
    if W == 1:
        n, skipped = _extract_single(buf, starts, ends, k, canonical, BASE_LUT, out)
    else:
        n, skipped = _extract_multi(buf, starts, ends, k, canonical, BASE_LUT, out)
    return out[:n], int(skipped)


def pack_sequences(seqs: Sequence[bytes]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate sequences into ``(buf, starts, ends)`` for :func:`extract_batch`."""
    lengths = np.fromiter((len(s) for s in seqs), dtype=np.int64, count=len(seqs))
    ends = np.cumsum(lengths)
    starts = ends - lengths
    buf = np.frombuffer(b"".join(seqs), dtype=np.uint8)
    return buf, starts, ends


def batch_layout(batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(buf, starts, ends)`` for a list of sequences or a 2-D uint8 array of equal-length reads."""
    if isinstance(batch, np.ndarray):
        if batch.ndim != 2:
            raise ValueError("read arrays must be 2-D (reads x length)")
        n, l = batch.shape
        starts = np.arange(n, dtype=np.int64) * l
        return np.ascontiguousarray(batch, dtype=np.uint8).ravel(), starts, starts + l
    return pack_sequences(batch)


def extract_from_sequences(seqs: Sequence[bytes], k: int, canonical: bool = True):
    buf, starts, ends = pack_sequences(seqs)
    return extract_batch(buf, starts, ends, k, canonical)


def codes_to_kmers(codes: np.ndarray, k: int) -> list[Kmer]:
    codes = np.asarray(codes, dtype=np.uint64)
    if codes.ndim == 1:
        codes = codes.reshape(-1, 1)
    return [Kmer(k, tuple(int(x) for x in row)) for row in codes]
