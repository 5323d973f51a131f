"""Exact k-mer counting and accuracy reports against exact histograms.

The counter is an open-addressing hash table keyed by packed k-mers (any
number of 64-bit words). It is meant for desk-scale validation: it refuses to
grow beyond ``max_distinct`` entries instead of approximating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numba as nb
import numpy as np

from .errors import CapacityError, ConfigurationError
from .hashing import hash_row_keyed
from .histogram import AbundanceHistogram
from .kmers import Kmer, n_words

_KA = np.uint64(0x2545F4914F6CDD1D)
_KB = np.uint64(0x9E3779B97F4A7C15)
DEFAULT_MAX_DISTINCT = 1 << 28
_MAX_LOAD = 0.6


@nb.njit(nogil=True, cache=True)
def _count_kernel(codes, weights, use_w, keys, counts, used, n_used, limit):
    """Insert rows of ``codes``; stop early when ``n_used`` reaches ``limit``.

    Returns ``(rows_consumed, n_used)``.
    """
    mask = np.uint64(keys.shape[0] - 1)
    W = codes.shape[1]
    for i in range(codes.shape[0]):
        row = codes[i]
        h = hash_row_keyed(row, _KA, _KB)
        slot = np.int64(h & mask)
        while True:
            if not used[slot]:
                if n_used >= limit:
                    return i, n_used
                used[slot] = True
                keys[slot, :] = row
                counts[slot] = weights[i] if use_w else 1
                n_used += 1
                break
            same = True
            for wi in range(W):
                if keys[slot, wi] != row[wi]:
                    same = False
                    break
            if same:
                counts[slot] += weights[i] if use_w else 1
                break
            slot = np.int64((np.uint64(slot) + np.uint64(1)) & mask)
    return codes.shape[0], n_used


@nb.njit(nogil=True, cache=True)
def _lookup_kernel(codes, keys, counts, used, out):
    mask = np.uint64(keys.shape[0] - 1)
    W = codes.shape[1]
    for i in range(codes.shape[0]):
        row = codes[i]
        slot = np.int64(hash_row_keyed(row, _KA, _KB) & mask)
        out[i] = 0
        while used[slot]:
            same = True
            for wi in range(W):
                if keys[slot, wi] != row[wi]:
                    same = False
                    break
            if same:
                out[i] = counts[slot]
                break
            slot = np.int64((np.uint64(slot) + np.uint64(1)) & mask)


@dataclass
class ExactCounts:
    """Exact multiplicity of every distinct packed k-mer.

    ``keys`` is uint64 ``(F0, words)``, ``counts`` int64 ``(F0,)``.
    """

    k: int
    keys: np.ndarray
    counts: np.ndarray
    N: int

    @property
    def f0(self) -> int:
        return int(self.counts.shape[0])

    def __len__(self) -> int:
        return self.f0

    @property
    def table(self) -> dict[Kmer, int]:
        return dict(self.items())

    def items(self) -> Iterator[tuple[Kmer, int]]:
        for row, c in zip(self.keys, self.counts):
            yield Kmer(self.k, tuple(int(x) for x in row)), int(c)

    def get(self, kmer: Kmer, default: int = 0) -> int:
        target = np.array(kmer.words, dtype=np.uint64)
        hit = np.nonzero((self.keys == target).all(axis=1))[0]
        return int(self.counts[hit[0]]) if hit.size else default


class ExactCounter:
    """Incremental exact counter for packed k-mers of one ``k``."""

    def __init__(self, k: int, max_distinct: int = DEFAULT_MAX_DISTINCT, initial_capacity: int = 1 << 16):
        if k < 1:
            raise ConfigurationError("k must be >= 1")
        self.k = k
        self.words = n_words(k) if k > 0 else 1
        self.max_distinct = max_distinct
        cap = 1 << max(4, (initial_capacity - 1).bit_length())
        self._alloc(cap)
        self.n_used = 0
        self.N = 0

    def _alloc(self, cap: int) -> None:
        self.keys = np.zeros((cap, self.words), dtype=np.uint64)
        self.counts = np.zeros(cap, dtype=np.int64)
        self.used = np.zeros(cap, dtype=np.bool_)

    def _grow(self) -> None:
        old_keys = self.keys[self.used]
        old_counts = self.counts[self.used]
        self._alloc(self.keys.shape[0] * 2)
        self.n_used = 0
        _, self.n_used = _count_kernel(
            old_keys, old_counts, True, self.keys, self.counts, self.used, 0, old_keys.shape[0]
        )

    def add(self, codes: np.ndarray, counts: np.ndarray | None = None) -> None:
        codes = np.asarray(codes, dtype=np.uint64)
        if codes.ndim == 1:
            codes = codes.reshape(-1, 1)
        if codes.shape[1] != self.words:
            raise ConfigurationError(f"expected {self.words}-word k-mers, got {codes.shape[1]}")
        codes = np.ascontiguousarray(codes)
        use_w = counts is not None
        weights = np.ascontiguousarray(counts, dtype=np.int64) if use_w else np.zeros(0, dtype=np.int64)
        pos = 0
        while pos < codes.shape[0]:
            limit = min(int(self.keys.shape[0] * _MAX_LOAD), self.max_distinct)
            done, self.n_used = _count_kernel(
                codes[pos:], weights[pos:] if use_w else weights, use_w,
                self.keys, self.counts, self.used, self.n_used, limit,
            )
            pos += done
            if pos < codes.shape[0]:
                if self.n_used >= self.max_distinct:
                    raise CapacityError(
                        f"exact counter exceeded its limit of {self.max_distinct} distinct k-mers"
                    )
                self._grow()
        self.N += int(weights.sum()) if use_w else codes.shape[0]

    def lookup(self, codes: np.ndarray) -> np.ndarray:
        """Multiplicity of each packed k-mer in ``codes`` (0 when absent)."""
        codes = np.asarray(codes, dtype=np.uint64)
        if codes.ndim == 1:
            codes = codes.reshape(-1, 1)
        out = np.empty(codes.shape[0], dtype=np.int64)
        _lookup_kernel(np.ascontiguousarray(codes), self.keys, self.counts, self.used, out)
        return out

    def add_kmer(self, kmer: Kmer) -> None:
        self.add(np.array([kmer.words], dtype=np.uint64))

    def result(self) -> ExactCounts:
        return ExactCounts(self.k, self.keys[self.used].copy(), self.counts[self.used].copy(), self.N)


def exact_count(
    kmers: Iterable[Kmer] | Iterable[np.ndarray] | np.ndarray,
    k: int | None = None,
    max_distinct: int = DEFAULT_MAX_DISTINCT,
) -> ExactCounts:
    """Exact multiplicities of a k-mer stream.

    Accepts a packed array, an iterable of packed arrays (batches), or an
    iterable of :class:`Kmer` objects.
    """
    if isinstance(kmers, np.ndarray):
        kmers = [kmers]
    counter: ExactCounter | None = None
    pending: list[tuple[int, ...]] = []

    def ensure(kk: int) -> ExactCounter:
        nonlocal counter
        if counter is None:
            counter = ExactCounter(kk, max_distinct)
        return counter

    for item in kmers:
        if isinstance(item, Kmer):
            ensure(item.k)
            pending.append(item.words)
            if len(pending) >= 1 << 16:
                counter.add(np.array(pending, dtype=np.uint64))
                pending.clear()
        else:
            arr = np.asarray(item, dtype=np.uint64)
            if k is None:
                raise ConfigurationError("k is required when counting packed arrays")
            ensure(k).add(arr)
    if pending:
        counter.add(np.array(pending, dtype=np.uint64))
    if counter is None:
        return ExactCounts(k or 0, np.zeros((0, n_words(k) if k else 1), dtype=np.uint64), np.zeros(0, dtype=np.int64), 0)
    return counter.result()


def exact_histogram(counts: ExactCounts) -> AbundanceHistogram:
    """``f_i`` = number of distinct k-mers seen exactly ``i`` times."""
    values, freq = np.unique(counts.counts, return_counts=True)
    return AbundanceHistogram(
        f0=counts.f0,
        counts={int(i): int(f) for i, f in zip(values, freq)},
        total_kmers=int(counts.N),
        source="exact",
        k=counts.k or None,
    )


# ---- accuracy reports -----------------------------------------------------

LAMBDA_GROUPS = (2, 4, 8, 16, 32, 64, 128)


def relative_error(estimate: float, truth: float) -> float | None:
    """``|estimate - truth| / truth``; ``None`` when ``truth`` is zero."""
    if truth == 0:
        return None
    return abs(estimate - truth) / truth


def lambda_group(lam: float, groups: tuple[int, ...] = LAMBDA_GROUPS) -> int:
    """Smallest group bound ``>= lam`` (the last bound collects the tail)."""
    for g in groups:
        if lam <= g:
            return g
    return groups[-1]


@dataclass
class StatError:
    name: str
    truth: float
    estimates: list[float]
    errors: list[float]
    lam: int | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def std(self) -> float:
        return float(np.std(self.errors))

    @property
    def mean_signed(self) -> float:
        return float(np.mean(self.estimates)) / self.truth - 1.0

    def to_json_dict(self) -> dict:
        return {
            "statistic": self.name,
            "exact": self.truth,
            "lambda": self.lam,
            "trials": len(self.errors),
            "mean_relative_error": self.mean,
            "std_relative_error": self.std,
            "mean_estimate": float(np.mean(self.estimates)),
        }


@dataclass
class ErrorReport:
    stats: dict[str, StatError] = field(default_factory=dict)
    excluded: list[str] = field(default_factory=list)
    trials: int = 0

    def error(self, name: str) -> float:
        return self.stats[name].mean

    def by_lambda(self) -> dict[int, dict]:
        """Mean and std of relative errors of the ``f_i`` grouped by ``lambda = ceil(F0/f_i)``."""
        groups: dict[int, list[float]] = {}
        for name, st in self.stats.items():
            if name == "F0" or st.lam is None:
                continue
            groups.setdefault(lambda_group(st.lam), []).extend(st.errors)
        return {
            g: {"count": len(v), "mean": float(np.mean(v)), "std": float(np.std(v))}
            for g, v in sorted(groups.items())
        }

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "trials": self.trials,
            "statistics": [st.to_json_dict() for st in self.stats.values()],
            "excluded_zero_statistics": self.excluded,
            "by_lambda": [{"lambda_max": g, **row} for g, row in self.by_lambda().items()],
        }


def compare(
    estimated: AbundanceHistogram | list[AbundanceHistogram],
    exact: AbundanceHistogram,
    max_i: int | None = None,
) -> ErrorReport:
    """Relative errors of one or several estimated histograms against an exact one."""
    if exact.source != "exact":
        raise ConfigurationError("the reference histogram must be exact")
    trials = estimated if isinstance(estimated, list) else [estimated]
    if max_i is None:
        max_i = max([exact.top()] + [h.top() for h in trials])
    report = ErrorReport(trials=len(trials))
    names: list[tuple[str, float, int | None, object]] = [("F0", exact.f0, None, lambda h: h.f0)]
    for i in range(1, max_i + 1):
        truth = exact.get(i)
        lam = math.ceil(exact.f0 / truth) if truth else None
        names.append((f"f{i}", truth, lam, lambda h, i=i: h.get(i)))
    for name, truth, lam, getter in names:
        if truth == 0:
            report.excluded.append(name)
            continue
        ests = [float(getter(h)) for h in trials]
        errs = [relative_error(e, truth) for e in ests]
        report.stats[name] = StatError(name, float(truth), ests, errs, lam)
    return report
