"""Seeded experiment records with stable JSON and CSV renderings."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field
from typing import Sequence

SCHEMA_VERSION = 1
CSV_COLUMNS = ("n", "mean_bits", "median_bits", "min_bits", "max_bits", "trials")


@dataclass(frozen=True)
class ReportRow:
    n: int
    mean_bits: float
    median_bits: float
    min_bits: float
    max_bits: float
    trials: int

    @classmethod
    def from_values(cls, n: int, values: Sequence[float]) -> "ReportRow":
        vals = [float(v) for v in values]
        return cls(n, statistics.fmean(vals), statistics.median(vals), min(vals), max(vals), len(vals))

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


@dataclass
class ExperimentReport:
    params: dict
    seed: int | None
    rows: list[ReportRow]
    metrics: dict = field(default_factory=dict)

    def row(self, n: int) -> ReportRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)

    def to_json(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "params": self.params,
            "seed": self.seed,
            "rows": [r.as_dict() for r in self.rows],
        }
        if self.metrics:
            out["metrics"] = self.metrics
        return out

    def dumps(self, fmt: str = "json") -> str:
        if fmt == "json":
            return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"
        if fmt == "csv":
            buf = io.StringIO()
            writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for r in self.rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.as_dict().items()})
            return buf.getvalue()
        raise ValueError(f"unknown format {fmt!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentReport":
        rows = [ReportRow(**{c: r[c] for c in CSV_COLUMNS}) for r in obj["rows"]]
        return cls(obj["params"], obj["seed"], rows, obj.get("metrics", {}))
