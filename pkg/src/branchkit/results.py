"""Long-format result rows, deterministic serialization, and run manifests.

Every experiment emits flat rows (one statistic per line) so a single
summarizer and a single plotting path cover all experiment kinds. Floats
are written with repr (shortest round-trip), and rows are sorted
canonically before writing, so a fixed (config, seed) run reproduces files
byte for byte even if parallel scheduling reorders production.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass

FIELDS = ("experiment", "statistic", "n", "rep", "level", "value", "se", "note")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    statistic: str
    value: float
    n: int | None = None
    rep: int | None = None
    level: int | None = None
    se: float | None = None
    note: str = ""

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"row value must be finite, got {self.value!r}")
        if self.se is not None and (self.se < 0 or not math.isfinite(self.se)):
            raise ValueError(f"row se must be finite and nonnegative, got {self.se!r}")

    def as_record(self) -> tuple:
        return (
            self.experiment,
            self.statistic,
            "" if self.n is None else str(self.n),
            "" if self.rep is None else str(self.rep),
            "" if self.level is None else str(self.level),
            repr(float(self.value)),
            "" if self.se is None else repr(float(self.se)),
            self.note,
        )


def sort_key(row: ResultRow):
    return (
        row.experiment,
        row.statistic,
        -1 if row.n is None else row.n,
        -1 if row.rep is None else row.rep,
        -1 if row.level is None else row.level,
        row.note,
    )


def _ensure_parent(path) -> None:
    parent = os.path.dirname(str(path))
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_rows(path, rows) -> None:
    rows = sorted(rows, key=sort_key)
    _ensure_parent(path)
    with open(path, "w") as fh:
        fh.write("\t".join(FIELDS) + "\n")
        for row in rows:
            fh.write("\t".join(row.as_record()) + "\n")


def read_rows(path) -> list[ResultRow]:
    out = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != FIELDS:
            raise ValueError(f"unexpected header {header}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(FIELDS):
                raise ValueError(f"malformed row at line {lineno}")
            exp, stat, n, rep, level, value, se, note = parts
            out.append(
                ResultRow(
                    experiment=exp,
                    statistic=stat,
                    n=int(n) if n else None,
                    rep=int(rep) if rep else None,
                    level=int(level) if level else None,
                    value=float(value),
                    se=float(se) if se else None,
                    note=note,
                )
            )
    return out


def config_hash(config_bytes: bytes) -> str:
    return hashlib.sha256(config_bytes).hexdigest()


def write_manifest(path, *, version, config_digest, seed, kernel, row_count) -> None:
    manifest = {
        "toolkit_version": version,
        "config_sha256": config_digest,
        "seed": seed,
        "kernel_backend": kernel,
        "rows": row_count,
    }
    _ensure_parent(path)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
