"""Multi-level counter sketch for k-mer abundance histograms.

Each of ``t`` instances keeps ``M`` sampling levels of ``r`` cells. A cell is a
pair ``(v, p)``: an occurrence counter and the auxiliary label of the first
item that touched it. A second item with a different label marks the cell
dirty (``v == -1``) for good. ``F0`` is estimated from the fraction of empty
cells at the level closest to half-full; ``f_i`` from the number of clean
cells holding exactly ``i`` at the level where that count peaks. Each
estimate is the median over instances.

Levels are allocated on first touch. Storage is a pool of ``(r,)`` rows plus a
``(t, M)`` table mapping a level to its pool row (``-1`` = never touched,
i.e. all zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from .errors import (
    ConfigurationError,
    EstimationError,
    MergeError,
    UnsupportedMultiplicityError,
)
from .hashing import ctz64, expand_seeds, hash_row_keyed, hash_word_keyed, seed_keys
from .histogram import AbundanceHistogram

V_MAX = 2**31 - 2
DIRTY = -1
MAX_LEVELS = 64
MAX_U = 1 << 16
DEFAULT_T = 7
DEFAULT_LOG2R = 16
DEFAULT_U = 1 << 16
# levels assumed resident when sizing a sketch against a memory budget
FOOTPRINT_LEVELS = 32
CELL_BYTES = 6

_U64 = np.uint64


@dataclass(frozen=True)
class SketchParams:
    """Parameter block shared by every instance of a sketch.

    ``k == 0`` marks a sketch over generic 64-bit items rather than k-mers.
    """

    t: int
    log2r: int
    u: int
    M: int
    seeds: tuple[int, ...]
    k: int = 0
    canonical: bool = True

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.t < 1 or self.t % 2 == 0:
            raise ConfigurationError(f"instance count t must be a positive odd integer, got {self.t}")
        if self.t > 0xFFFF:
            raise ConfigurationError("instance count t must fit in 16 bits")
        if not 1 <= self.log2r <= 30:
            raise ConfigurationError(f"log2r must be in [1, 30] (r >= 2), got {self.log2r}")
        if not 8 <= self.u <= MAX_U:
            raise ConfigurationError(f"u must be in [8, {MAX_U}], got {self.u}")
        if not 1 <= self.M <= MAX_LEVELS:
            raise ConfigurationError(f"M must be in [1, {MAX_LEVELS}], got {self.M}")
        if len(self.seeds) != self.t:
            raise ConfigurationError(f"expected {self.t} seeds, got {len(self.seeds)}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("instance seeds must be pairwise distinct")
        if any(s < 0 or s >= 1 << 64 for s in self.seeds):
            raise ConfigurationError("seeds must be unsigned 64-bit values")
        if not 0 <= self.k <= 1024:
            raise ConfigurationError(f"k must be in [0, 1024], got {self.k}")

    @classmethod
    def create(
        cls,
        t: int = DEFAULT_T,
        log2r: int = DEFAULT_LOG2R,
        u: int = DEFAULT_U,
        M: int = MAX_LEVELS,
        seed: int = 1,
        k: int = 0,
        canonical: bool = True,
    ) -> "SketchParams":
        """Build params, expanding ``seed`` into ``t`` instance seeds."""
        if t < 1:
            raise ConfigurationError(f"instance count t must be a positive odd integer, got {t}")
        return cls(t=t, log2r=log2r, u=u, M=M, seeds=tuple(expand_seeds(seed, t)), k=k, canonical=canonical)

    @property
    def r(self) -> int:
        return 1 << self.log2r

    def compatible_with(self, other: "SketchParams") -> bool:
        return self == other


def footprint_bytes(t: int, log2r: int, levels: int = FOOTPRINT_LEVELS) -> int:
    """Memory model used for ``--mem-budget``: ``t * levels * r`` 6-byte cells."""
    return t * levels * (1 << log2r) * CELL_BYTES


def log2r_for_budget(budget_bytes: int, t: int = DEFAULT_T, levels: int = FOOTPRINT_LEVELS) -> int:
    """Largest ``log2r`` whose :func:`footprint_bytes` fits in ``budget_bytes``."""
    best = None
    for log2r in range(1, 31):
        if footprint_bytes(t, log2r, levels) <= budget_bytes:
            best = log2r
    if best is None:
        raise ConfigurationError(f"memory budget {budget_bytes} B is below the smallest sketch")
    return best


@dataclass(frozen=True)
class LevelAddress:
    w: int
    c: int
    j: int


def locate(z: int, params: SketchParams) -> LevelAddress:
    """Map a 64-bit hash to its (level, counter, label) address."""
    z = int(z) & ((1 << 64) - 1)
    if z == 0:
        w = params.M
    else:
        w = min(1 + ((z & -z).bit_length() - 1), params.M)
    x = z >> w
    return LevelAddress(w=w, c=(x // params.u) % params.r, j=x % params.u)


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@nb.njit(inline="always")
def _address(z, M, u, u_shift, u_mask, r_mask):
    if z == _U64(0):
        w = M
    else:
        w = 1 + ctz64(z)
        if w > M:
            w = M
    if w >= 64:
        x = _U64(0)
    else:
        x = z >> _U64(w)
    if u_shift >= 0:
        j = x & u_mask
        c = (x >> _U64(u_shift)) & r_mask
    else:
        uu = _U64(u)
        j = x % uu
        c = (x // uu) & r_mask
    return w, np.int64(c), j


@nb.njit(nogil=True, cache=True)
def _update_codes_kernel(
    codes, weights, use_weights, keys_a, keys_b, slot_of, pool_v, pool_p,
    M, u, u_shift, u_mask, r_mask, vmax, inst0, pos0,
):
    """Hash and apply ``codes`` (n, words) to every instance.

    Returns ``(-1, 0, 0)`` when done, or ``(inst, pos, level)`` when an
    unallocated level is hit; the caller allocates it and resumes there.
    """
    n = codes.shape[0]
    t = keys_a.shape[0]
    single = codes.shape[1] == 1
    for inst in range(inst0, t):
        a = keys_a[inst]
        b = keys_b[inst]
        start = pos0 if inst == inst0 else 0
        for i in range(start, n):
            if single:
                z = hash_word_keyed(codes[i, 0], a, b)
            else:
                z = hash_row_keyed(codes[i], a, b)
            w, c, j = _address(z, M, u, u_shift, u_mask, r_mask)
            slot = slot_of[inst, w - 1]
            if slot < 0:
                return inst, i, w
            cnt = weights[i] if use_weights else np.int64(1)
            jj = np.uint16(j)
            v = pool_v[slot, c]
            if v == 0:
                pool_v[slot, c] = cnt if cnt < vmax else vmax
                pool_p[slot, c] = jj
            elif v > 0:
                if pool_p[slot, c] != jj:
                    pool_v[slot, c] = -1
                else:
                    nv = v + cnt
                    pool_v[slot, c] = nv if nv < vmax else vmax
    return -1, 0, 0


@nb.njit(nogil=True, cache=True)
def _update_hashes_kernel(
    hashes, weights, use_weights, slot_of, pool_v, pool_p,
    M, u, u_shift, u_mask, r_mask, vmax, inst0, pos0,
):
    """Like :func:`_update_codes_kernel` for precomputed hashes ``(n, t)``."""
    n = hashes.shape[0]
    t = hashes.shape[1]
    for inst in range(inst0, t):
        start = pos0 if inst == inst0 else 0
        for i in range(start, n):
            w, c, j = _address(hashes[i, inst], M, u, u_shift, u_mask, r_mask)
            slot = slot_of[inst, w - 1]
            if slot < 0:
                return inst, i, w
            cnt = weights[i] if use_weights else np.int64(1)
            jj = np.uint16(j)
            v = pool_v[slot, c]
            if v == 0:
                pool_v[slot, c] = cnt if cnt < vmax else vmax
                pool_p[slot, c] = jj
            elif v > 0:
                if pool_p[slot, c] != jj:
                    pool_v[slot, c] = -1
                else:
                    nv = v + cnt
                    pool_v[slot, c] = nv if nv < vmax else vmax
    return -1, 0, 0


@nb.njit(nogil=True, cache=True)
def _value_census(row, max_i, out):
    for c in range(row.shape[0]):
        v = row[c]
        if v == 0:
            out[0] += 1
        elif 0 < v <= max_i:
            out[v] += 1


def _median(values: Sequence[float]) -> float:
    """Middle order statistic; lower median when the count is even."""
    s = sorted(values)
    return float(s[(len(s) - 1) // 2])


# --------------------------------------------------------------------------
# sketch
# --------------------------------------------------------------------------


@dataclass
class AbundanceSketch:
    """``t`` independent sketch instances plus the exact update count."""

    params: SketchParams
    slot_of: np.ndarray = field(repr=False)
    pool_v: np.ndarray = field(repr=False)
    pool_p: np.ndarray = field(repr=False)
    n_slots: int = 0
    total_updates: int = 0

    @classmethod
    def new(cls, params: SketchParams, initial_slots: int = 0) -> "AbundanceSketch":
        r = params.r
        cap = max(0, initial_slots)
        return cls(
            params=params,
            slot_of=np.full((params.t, params.M), -1, dtype=np.int32),
            pool_v=np.zeros((cap, r), dtype=np.int32),
            pool_p=np.zeros((cap, r), dtype=np.uint16),
        )

    # ---- storage ----------------------------------------------------------
    def _alloc(self, inst: int, w: int) -> int:
        if self.n_slots == self.pool_v.shape[0]:
            cap = max(8, 2 * self.pool_v.shape[0])
            r = self.params.r
            nv = np.zeros((cap, r), dtype=np.int32)
            np_ = np.zeros((cap, r), dtype=np.uint16)
            nv[: self.n_slots] = self.pool_v[: self.n_slots]
            np_[: self.n_slots] = self.pool_p[: self.n_slots]
            self.pool_v, self.pool_p = nv, np_
        slot = self.n_slots
        self.slot_of[inst, w - 1] = slot
        self.n_slots += 1
        return slot

    def allocated_levels(self, inst: int) -> list[int]:
        return [w + 1 for w in range(self.params.M) if self.slot_of[inst, w] >= 0]

    def level(self, inst: int, w: int) -> tuple[np.ndarray, np.ndarray]:
        """``(v, p)`` arrays of level ``w`` (1-based) of instance ``inst``."""
        slot = self.slot_of[inst, w - 1]
        if slot < 0:
            r = self.params.r
            return np.zeros(r, dtype=np.int32), np.zeros(r, dtype=np.uint16)
        return self.pool_v[slot], self.pool_p[slot]

    def set_level(self, inst: int, w: int, v: np.ndarray, p: np.ndarray) -> None:
        slot = self.slot_of[inst, w - 1]
        if slot < 0:
            slot = self._alloc(inst, w)
        self.pool_v[slot] = v
        self.pool_p[slot] = p

    def nbytes(self) -> int:
        return self.n_slots * self.params.r * CELL_BYTES

    def _kernel_consts(self):
        p = self.params
        if p.u & (p.u - 1) == 0:
            u_shift = p.u.bit_length() - 1
            u_mask = _U64(p.u - 1)
        else:
            u_shift = -1
            u_mask = _U64(0)
        return p.M, p.u, u_shift, u_mask, _U64(p.r - 1), np.int64(V_MAX)

    # ---- updates ----------------------------------------------------------
    def update(self, hashes: Sequence[int]) -> None:
        """Apply one occurrence given its hash value under each instance seed."""
        if len(hashes) != self.params.t:
            raise ConfigurationError(f"need one hash per instance ({self.params.t}), got {len(hashes)}")
        arr = np.array([[int(h) & ((1 << 64) - 1) for h in hashes]], dtype=np.uint64)
        self.update_hashes(arr)

    def update_hashes(self, hashes: np.ndarray, counts: np.ndarray | None = None) -> None:
        """Bulk form of :meth:`update`; ``hashes`` has shape ``(n, t)``."""
        hashes = np.ascontiguousarray(hashes, dtype=np.uint64)
        if hashes.ndim != 2 or hashes.shape[1] != self.params.t:
            raise ConfigurationError("hashes must have shape (n, t)")
        weights, use_w, total = self._weights(counts, hashes.shape[0])
        consts = self._kernel_consts()
        inst, pos = 0, 0
        while True:
            inst, pos, w = _update_hashes_kernel(
                hashes, weights, use_w, self.slot_of, self.pool_v, self.pool_p, *consts, inst, pos
            )
            if inst < 0:
                break
            self._alloc(inst, w)
        self.total_updates += total

    def update_codes(self, codes: np.ndarray, counts: np.ndarray | None = None) -> None:
        """Hash and apply packed k-mers / 64-bit items.

        ``codes`` is uint64 of shape ``(n,)`` or ``(n, words)``. ``counts``, if
        given, applies item ``i`` that many times at once; the resulting
        cell state equals repeating the item ``counts[i]`` times.
        """
        codes = np.asarray(codes, dtype=np.uint64)
        if codes.ndim == 1:
            codes = codes.reshape(-1, 1)
        codes = np.ascontiguousarray(codes)
        weights, use_w, total = self._weights(counts, codes.shape[0])
        keys = [seed_keys(s) for s in self.params.seeds]
        keys_a = np.array([k[0] for k in keys], dtype=np.uint64)
        keys_b = np.array([k[1] for k in keys], dtype=np.uint64)
        consts = self._kernel_consts()
        inst, pos = 0, 0
        while True:
            inst, pos, w = _update_codes_kernel(
                codes, weights, use_w, keys_a, keys_b, self.slot_of, self.pool_v, self.pool_p,
                *consts, inst, pos,
            )
            if inst < 0:
                break
            self._alloc(inst, w)
        self.total_updates += total

    update_items = update_codes

    @staticmethod
    def _weights(counts, n):
        if counts is None:
            return np.zeros(0, dtype=np.int64), False, n
        w = np.ascontiguousarray(counts, dtype=np.int64)
        if w.shape != (n,):
            raise ConfigurationError("counts must match the number of items")
        if n and w.min() < 1:
            raise ConfigurationError("counts must be positive")
        return w, True, int(w.sum())

    # ---- merge ------------------------------------------------------------
    def merge(self, other: "AbundanceSketch") -> "AbundanceSketch":
        """Cell-wise combination; equal to ingesting ``self``'s stream then ``other``'s."""
        if not self.params.compatible_with(other.params):
            raise MergeError("cannot merge sketches with different parameters or seeds")
        out = AbundanceSketch.new(self.params)
        for inst in range(self.params.t):
            for w in range(1, self.params.M + 1):
                sa = self.slot_of[inst, w - 1]
                sb = other.slot_of[inst, w - 1]
                if sa < 0 and sb < 0:
                    continue
                if sb < 0:
                    out.set_level(inst, w, self.pool_v[sa], self.pool_p[sa])
                    continue
                if sa < 0:
                    out.set_level(inst, w, other.pool_v[sb], other.pool_p[sb])
                    continue
                v, p = merge_cells(self.pool_v[sa], self.pool_p[sa], other.pool_v[sb], other.pool_p[sb])
                out.set_level(inst, w, v, p)
        out.total_updates = self.total_updates + other.total_updates
        return out

    # ---- estimation -------------------------------------------------------
    def _census(self, max_i: int) -> np.ndarray:
        """Array ``(t, M, max_i + 1)``; ``[..., 0]`` is the zero count."""
        p = self.params
        out = np.zeros((p.t, p.M, max_i + 1), dtype=np.int64)
        for inst in range(p.t):
            for w in range(p.M):
                slot = self.slot_of[inst, w]
                if slot < 0:
                    out[inst, w, 0] = p.r
                else:
                    _value_census(self.pool_v[slot], max_i, out[inst, w])
        return out

    def instance_f0_estimates(self, census: np.ndarray | None = None) -> list[float | None]:
        """Per-instance ``F0`` estimates; ``None`` for an instance with no usable level."""
        p = self.params
        if census is None:
            census = self._census(0)
        r = p.r
        log_q = math.log1p(-1.0 / r)
        out: list[float | None] = []
        for inst in range(p.t):
            zeros = census[inst, :, 0]
            dist = np.abs(zeros / r - 0.5)
            # stable sort: ties resolve to the smallest level
            order = np.argsort(dist, kind="stable")
            est = None
            for wi in order:
                z = int(zeros[wi])
                if z == 0:
                    continue
                est = (2.0 ** (wi + 1)) * math.log(z / r) / log_q
                break
            out.append(est)
        return out

    def estimate_f0(self) -> float:
        if self.total_updates == 0:
            return 0.0
        ests = [e for e in self.instance_f0_estimates() if e is not None]
        if not ests:
            raise EstimationError("sketch saturated: no level has an empty counter in any instance")
        return _median(ests)

    def instance_fi_estimates(self, i: int, f0_hat: float, census: np.ndarray | None = None) -> list[float]:
        p = self.params
        if census is None:
            census = self._census(i)
        r = p.r
        log_q = math.log1p(-1.0 / r)
        out = []
        for inst in range(p.t):
            counts = census[inst, :, i]
            wi = int(np.argmax(counts))
            ti = int(counts[wi])
            if ti == 0:
                out.append(0.0)
                continue
            scale = 2.0 ** (wi + 1)
            p0 = math.exp((f0_hat / scale) * log_q)
            pi = ti / r
            out.append(scale * (r - 1) * pi / p0)
        return out

    def estimate_fi(self, i: int, f0_hat: float | None = None) -> float:
        if i < 1:
            raise ConfigurationError("multiplicity must be >= 1")
        if i > V_MAX:
            raise UnsupportedMultiplicityError(f"multiplicity {i} exceeds saturation value {V_MAX}")
        if self.total_updates == 0:
            return 0.0
        if f0_hat is None:
            f0_hat = self.estimate_f0()
        return _median(self.instance_fi_estimates(i, f0_hat))

    def estimate_histogram(self, max_i: int) -> AbundanceHistogram:
        if max_i > V_MAX:
            raise UnsupportedMultiplicityError(f"max multiplicity {max_i} exceeds saturation value {V_MAX}")
        p = self.params
        hist = AbundanceHistogram(f0=0.0, counts={}, total_kmers=self.total_updates, source="sketch", k=p.k or None)
        if self.total_updates == 0 or max_i < 1:
            if self.total_updates:
                hist.f0 = self.estimate_f0()
            return hist
        census = self._census(max_i)
        ests = [e for e in self.instance_f0_estimates(census) if e is not None]
        if not ests:
            raise EstimationError("sketch saturated: no level has an empty counter in any instance")
        f0_hat = _median(ests)
        hist.f0 = f0_hat
        for i in range(1, max_i + 1):
            if not census[:, :, i].any():
                continue
            val = _median(self.instance_fi_estimates(i, f0_hat, census))
            if val > 0:
                hist.counts[i] = val
        return hist

    # ---- misc -------------------------------------------------------------
    def copy(self) -> "AbundanceSketch":
        return AbundanceSketch(
            params=self.params,
            slot_of=self.slot_of.copy(),
            pool_v=self.pool_v[: self.n_slots].copy(),
            pool_p=self.pool_p[: self.n_slots].copy(),
            n_slots=self.n_slots,
            total_updates=self.total_updates,
        )

    def v_census_equal(self, other: "AbundanceSketch") -> bool:
        """True when every cell's counter value matches (labels ignored)."""
        if self.params != other.params:
            return False
        for inst in range(self.params.t):
            for w in range(1, self.params.M + 1):
                if not np.array_equal(self.level(inst, w)[0], other.level(inst, w)[0]):
                    return False
        return True

    def state_equal(self, other: "AbundanceSketch") -> bool:
        """True when every cell's ``(v, p)`` matches and update totals agree."""
        if self.params != other.params or self.total_updates != other.total_updates:
            return False
        for inst in range(self.params.t):
            for w in range(1, self.params.M + 1):
                va, pa = self.level(inst, w)
                vb, pb = other.level(inst, w)
                if not (np.array_equal(va, vb) and np.array_equal(pa, pb)):
                    return False
        return True

    def to_bytes(self) -> bytes:
        from .serialize import serialize

        return serialize(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "AbundanceSketch":
        from .serialize import deserialize

        return deserialize(data)


def merge_cells(va, pa, vb, pb) -> tuple[np.ndarray, np.ndarray]:
    """Combine two cell arrays of the same level."""
    va = np.asarray(va, dtype=np.int64)
    vb = np.asarray(vb, dtype=np.int64)
    pa = np.asarray(pa)
    pb = np.asarray(pb)
    summed = np.minimum(va + vb, V_MAX)
    clash = (va < 0) | (vb < 0) | (pa != pb)
    v = np.where(va == 0, vb, np.where(vb == 0, va, np.where(clash, DIRTY, summed)))
    p = np.where(va == 0, pb, pa)
    return v.astype(np.int32), p.astype(np.uint16)


# ---- functional aliases ---------------------------------------------------


def new_sketch(params: SketchParams) -> AbundanceSketch:
    return AbundanceSketch.new(params)


def update(sketch: AbundanceSketch, item_hash_per_instance: Sequence[int]) -> None:
    sketch.update(item_hash_per_instance)


def merge(a: AbundanceSketch, b: AbundanceSketch) -> AbundanceSketch:
    return a.merge(b)


def merge_all(sketches: Iterable[AbundanceSketch]) -> AbundanceSketch:
    it = iter(sketches)
    try:
        acc = next(it)
    except StopIteration:
        raise MergeError("nothing to merge") from None
    for s in it:
        acc = acc.merge(s)
    return acc


def estimate_f0(sketch: AbundanceSketch) -> float:
    return sketch.estimate_f0()


def estimate_fi(sketch: AbundanceSketch, i: int, f0_hat: float | None = None) -> float:
    return sketch.estimate_fi(i, f0_hat)


def estimate_histogram(sketch: AbundanceSketch, max_i: int) -> AbundanceHistogram:
    return sketch.estimate_histogram(max_i)
