"""Result records with fixed JSON/CSV layouts.

Every CSV starts with ``kind``, then the record's parameter columns in
insertion order, then ``estimate, stderr, samples, seed, wall_ms``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

TAIL_COLUMNS = ("estimate", "stderr", "samples", "seed", "wall_ms")


@dataclass
class Report:
    """One estimate with its provenance."""

    kind: str
    estimate: float
    stderr: float = 0.0
    samples: int | str = "exact"
    seed: int | str = ""
    wall_ms: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return self.samples == "exact"

    def row(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        out.update(self.params)
        out.update(estimate=self.estimate, stderr=self.stderr, samples=self.samples,
                   seed=self.seed, wall_ms=self.wall_ms)
        return out

    def to_json(self) -> str:
        return json.dumps(self.row(), allow_nan=False)

    def check_finite(self):
        for name in ("estimate", "stderr"):
            v = getattr(self, name)
            if isinstance(v, float) and not math.isfinite(v):
                raise FloatingPointError(f"{self.kind}: non-finite {name} ({v})")


@dataclass
class SensitivityReport(Report):
    """Sensitivity estimate; ``parameter`` is delta for ns/gns and ``None`` for as/gas."""

    parameter: float | None = None

    def __post_init__(self):
        if self.kind not in ("ns", "gns", "as", "gas"):
            raise ValueError(f"unknown sensitivity kind {self.kind!r}")
        if self.parameter is not None:
            self.params = {"delta": self.parameter, **self.params}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows: Iterable[dict[str, Any]]) -> str:
    rows = list(rows)
    if not rows:
        return ""
    middle: list[str] = []
    for r in rows:
        for k in r:
            if k != "kind" and k not in TAIL_COLUMNS and k not in middle:
                middle.append(k)
    tail = [c for c in TAIL_COLUMNS if any(c in r for r in rows)]
    header = ["kind", *middle, *tail]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in header])
    return buf.getvalue()


def reports_to_csv(reports: Iterable[Report]) -> str:
    return rows_to_csv(r.row() for r in reports)


def reports_to_json(reports: Iterable[Report]) -> str:
    return json.dumps([r.row() for r in reports], indent=2, allow_nan=False)
