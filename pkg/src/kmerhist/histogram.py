"""Abundance histogram container and its TSV / JSON encodings.

TSV layout::

    #F0	<value>
    #N	<total k-mers>
    #source	sketch|exact
    #k	<k>            (optional)
    1	<f_1>
    2	<f_2>
    ...

Rows run from 1 to the largest non-zero multiplicity (or ``max_i`` when
given), zeros included, so the file is directly plottable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class AbundanceHistogram:
    f0: float
    counts: dict[int, float] = field(default_factory=dict)
    total_kmers: int = 0
    source: str = "sketch"
    k: int | None = None
    max_i: int | None = None

    def __post_init__(self):
        if self.source not in ("sketch", "exact"):
            raise ValueError(f"unknown histogram source {self.source!r}")

    def get(self, i: int) -> float:
        return self.counts.get(i, 0)

    def dense(self, max_i: int | None = None) -> np.ndarray:
        """Array ``a`` with ``a[i] = f_i`` for ``0 <= i <= max_i`` (``a[0] = 0``)."""
        top = max_i if max_i is not None else self.top()
        arr = np.zeros(top + 1, dtype=np.float64)
        for i, v in self.counts.items():
            if 1 <= i <= top:
                arr[i] = v
        return arr

    def top(self) -> int:
        nonzero = [i for i, v in self.counts.items() if v]
        top = max(nonzero) if nonzero else 0
        if self.max_i is not None:
            top = max(top, self.max_i) if nonzero else top
        return top

    def check_exact_identities(self) -> bool:
        """Both partition identities, exactly (only meaningful for exact histograms)."""
        return sum(self.counts.values()) == self.f0 and sum(i * v for i, v in self.counts.items()) == self.total_kmers

    # ---- encodings -----------------------------------------------------------
    def to_tsv(self) -> str:
        lines = [f"#F0\t{_fmt(self.f0)}", f"#N\t{self.total_kmers}", f"#source\t{self.source}"]
        if self.k:
            lines.append(f"#k\t{self.k}")
        top = self.top()
        for i in range(1, top + 1):
            lines.append(f"{i}\t{_fmt(self.counts.get(i, 0))}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "source": self.source,
            "k": self.k,
            "f0": self.f0,
            "total_kmers": self.total_kmers,
            "counts": {str(i): self.counts[i] for i in sorted(self.counts)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json_dict(cls, data: dict) -> "AbundanceHistogram":
        source = data.get("source", "sketch")
        conv = int if source == "exact" else float
        counts = {int(i): conv(v) for i, v in data.get("counts", {}).items() if v}
        return cls(
            f0=conv(data["f0"]),
            counts=counts,
            total_kmers=int(data.get("total_kmers", 0)),
            source=source,
            k=data.get("k"),
        )

    @classmethod
    def from_tsv(cls, text: str) -> "AbundanceHistogram":
        meta: dict[str, str] = {}
        rows: list[tuple[int, str]] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t")
            if line.startswith("#"):
                if len(parts) >= 2:
                    meta[parts[0][1:]] = parts[1]
                continue
            if len(parts) != 2:
                raise ValueError(f"bad histogram row: {raw!r}")
            rows.append((int(parts[0]), parts[1]))
        if "F0" not in meta:
            raise ValueError("histogram TSV lacks the #F0 header line")
        source = meta.get("source", "sketch")
        conv = _parse_int if source == "exact" else float
        counts = {}
        for i, v in rows:
            val = conv(v)
            if val:
                counts[i] = val
        return cls(
            f0=conv(meta["F0"]),
            counts=counts,
            total_kmers=int(meta.get("N", 0)),
            source=source,
            k=int(meta["k"]) if "k" in meta else None,
        )

    def write(self, out: str | Path | IO[str], fmt: str = "tsv") -> None:
        text = self.to_tsv() if fmt == "tsv" else self.to_json()
        if hasattr(out, "write"):
            out.write(text)
        else:
            Path(out).write_text(text)

    @classmethod
    def read(cls, path: str | Path) -> "AbundanceHistogram":
        text = Path(path).read_text()
        if text.lstrip().startswith("{"):
            return cls.from_json_dict(json.loads(text))
        return cls.from_tsv(text)


def _parse_int(s: str) -> int:
    return int(float(s)) if any(ch in s for ch in ".eE") else int(s)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    fv = float(v)
    if math.isfinite(fv) and fv == int(fv) and abs(fv) < 2**53:
        return f"{int(fv)}"
    return repr(fv)
