"""Portable binary sketch files.

Layout (all integers little-endian)::

    magic       4s   b"KMLT"
    version     u16
    t           u16
    log2r       u8
    u           u32
    M           u8
    k           u16
    canonical   u8
    seeds       t x u64
    total       u64          exact number of updates
    per instance:
        bitmap  u64          bit (w - 1) set when level w is stored
        levels  r x (i32 v, u16 p) per stored level, ascending w
    crc32       u32          over every preceding byte

Only levels that were ever touched are stored; missing levels are all zero.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ChecksumError, SketchFormatError, TruncationError, VersionMismatchError
from .sketch import AbundanceSketch, SketchParams

MAGIC = b"KMLT"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<4sHHBIBHB")
CELL_DTYPE = np.dtype([("v", "<i4"), ("p", "<u2")])
assert CELL_DTYPE.itemsize == 6


def header_size(t: int) -> int:
    """Bytes before the first level record (magic through the bitmaps)."""
    return _HEAD.size + 8 * t + 8 + 8 * t


def serialized_size(t: int, r: int, stored_levels: int) -> int:
    return header_size(t) + stored_levels * r * CELL_DTYPE.itemsize + 4


def serialize(sketch: AbundanceSketch) -> bytes:
    p = sketch.params
    parts = [
        _HEAD.pack(MAGIC, FORMAT_VERSION, p.t, p.log2r, p.u, p.M, p.k, int(p.canonical)),
        struct.pack(f"<{p.t}Q", *p.seeds),
        struct.pack("<Q", sketch.total_updates),
    ]
    for inst in range(p.t):
        levels = sketch.allocated_levels(inst)
        bitmap = 0
        for w in levels:
            bitmap |= 1 << (w - 1)
        parts.append(struct.pack("<Q", bitmap))
        for w in levels:
            v, pv = sketch.level(inst, w)
            rec = np.empty(p.r, dtype=CELL_DTYPE)
            rec["v"] = v
            rec["p"] = pv
            parts.append(rec.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def deserialize(data: bytes) -> AbundanceSketch:
    data = bytes(data)
    if len(data) < _HEAD.size:
        raise TruncationError(f"sketch file too short ({len(data)} bytes)")
    magic, version, t, log2r, u, M, k, canonical = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise SketchFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"unsupported sketch format version {version} (expected {FORMAT_VERSION})")
    need = header_size(t) + 4
    if len(data) < need:
        raise TruncationError(f"sketch file truncated in header ({len(data)} < {need} bytes)")
    off = _HEAD.size
    seeds = struct.unpack_from(f"<{t}Q", data, off)
    off += 8 * t
    (total,) = struct.unpack_from("<Q", data, off)
    off += 8
    r = 1 << log2r
    rec_bytes = r * CELL_DTYPE.itemsize
    # first pass: compute the full size before touching any level payload
    bitmaps = []
    scan = off
    for _ in range(t):
        if scan + 8 > len(data) - 4:
            raise TruncationError("sketch file truncated in level bitmaps")
        (bm,) = struct.unpack_from("<Q", data, scan)
        bitmaps.append(bm)
        scan += 8 + bin(bm).count("1") * rec_bytes
    if scan + 4 > len(data):
        raise TruncationError(f"sketch file truncated ({len(data)} < {scan + 4} bytes)")
    if scan + 4 != len(data):
        raise SketchFormatError(f"sketch file has {len(data) - scan - 4} trailing bytes")
    (crc,) = struct.unpack_from("<I", data, scan)
    if zlib.crc32(data[:scan]) & 0xFFFFFFFF != crc:
        raise ChecksumError("sketch file checksum mismatch")
    try:
        params = SketchParams(t=t, log2r=log2r, u=u, M=M, seeds=tuple(seeds), k=k, canonical=bool(canonical))
    except ValueError as exc:
        raise SketchFormatError(f"invalid parameters in sketch file: {exc}") from exc
    sketch = AbundanceSketch.new(params)
    for inst, bm in enumerate(bitmaps):
        off += 8
        for w in range(1, 65):
            if bm >> (w - 1) & 1:
                if w > M:
                    raise SketchFormatError(f"level {w} stored but M = {M}")
                rec = np.frombuffer(data, dtype=CELL_DTYPE, count=r, offset=off)
                sketch.set_level(inst, w, rec["v"], rec["p"])
                off += rec_bytes
    sketch.total_updates = total
    return sketch


def save(sketch: AbundanceSketch, path: str | Path) -> None:
    Path(path).write_bytes(serialize(sketch))


def load(path: str | Path) -> AbundanceSketch:
    return deserialize(Path(path).read_bytes())
