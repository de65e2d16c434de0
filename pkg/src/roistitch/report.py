"""CSV and JSON-lines writers for run metrics.

File layouts (headers are fixed):

``summary.csv``
    one row per run, columns :data:`SUMMARY_FIELDS`
``patches.csv``
    one row per admitted patch, columns :data:`PATCH_FIELDS`
``invocations.csv``
    one row per invocation, columns :data:`INVOCATION_FIELDS`;
    ``efficiencies`` is a ``;``-separated list, one value per canvas
``events.jsonl``
    the scheduler event log, one JSON object per line
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, fields
from decimal import Decimal
from pathlib import Path
from typing import Iterable

from .sim import InvocationRecord, PatchRecord, RunMetrics

SUMMARY_FIELDS = [
    "policy",
    "patches",
    "rejected",
    "invocations",
    "canvases",
    "total_cost",
    "bandwidth_bytes",
    "violations",
    "violation_rate",
    "infeasible_at_arrival",
    "mean_latency_ms",
    "mean_amortized_latency_ms",
    "mean_canvas_efficiency",
    "median_canvas_efficiency",
]
PATCH_FIELDS = [f.name for f in fields(PatchRecord)]
INVOCATION_FIELDS = [f.name for f in fields(InvocationRecord)]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, Decimal):
        return format(v, "f")
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ";".join(fmt(x) for x in v)
    return str(v)


def _write(path: Path, header: list[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row.get(h)) for h in header])


def write_summary(path: str | Path, rows: Iterable[dict], extra: list[str] | None = None) -> None:
    _write(Path(path), (extra or []) + SUMMARY_FIELDS, rows)


def write_patches(path: str | Path, metrics: RunMetrics) -> None:
    _write(Path(path), PATCH_FIELDS, (asdict(p) for p in metrics.patches))


def write_invocations(path: str | Path, metrics: RunMetrics) -> None:
    _write(Path(path), INVOCATION_FIELDS, (asdict(i) for i in metrics.invocations))


def write_events(path: str | Path, events: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in events:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def read_events(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def summary_line(summary: dict) -> str:
    return (
        f"policy={summary['policy']} cost={fmt(summary['total_cost'])} "
        f"violation_rate={summary['violation_rate']:.4f} "
        f"mean_canvas_efficiency={summary['mean_canvas_efficiency']:.4f}"
    )
