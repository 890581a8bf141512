"""Aggregate experiment results into figure-shaped CSV files.

Three report kinds are supported:

* ``characterize`` — the sorted first-flip distribution (most resilient
  row first) plus per-kind minima/means, from sweep result rows.
* ``trr-eval`` — bitflip counts per technique with the sampler on and
  off, averaged over seeds.
* ``perf`` — weighted-speedup/overhead rows passed through with a
  schema check.

All writers emit '\\n'-terminated rows in a deterministic order so a
rerun from the same manifest is byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from .errors import ConfigError, ShapeError
from .harness import RESULT_COLUMNS
from .perf import PERF_COLUMNS

REPORT_KINDS = ("characterize", "trr-eval", "perf")


def write_csv(path: Path, columns: tuple[str, ...], rows: Iterable[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            extra = set(row) - set(columns)
            if extra:
                raise ShapeError(f"row has unexpected columns {sorted(extra)}")
            w.writerow(row)
    return path


def _hc_reports(rows: list[dict], out_dir: Path) -> list[Path]:
    measured = [r for r in rows if r.get("hcfirst") not in (None, "", "no-flip")]
    dist = []
    for kind in sorted({r["kind"] for r in measured}):
        vals = sorted(
            (int(r["hcfirst"]) for r in measured if r["kind"] == kind), reverse=True
        )
        dist.extend(
            {"kind": kind, "rank": i, "hcfirst": v} for i, v in enumerate(vals)
        )
    p1 = write_csv(out_dir / "hc_distribution.csv", ("kind", "rank", "hcfirst"), dist)
    minima = []
    for kind in sorted({r["kind"] for r in measured}):
        vals = [int(r["hcfirst"]) for r in measured if r["kind"] == kind]
        minima.append(
            {
                "kind": kind,
                "min": min(vals),
                "mean": round(sum(vals) / len(vals), 2),
                "count": len(vals),
            }
        )
    p2 = write_csv(out_dir / "hc_minima.csv", ("kind", "min", "mean", "count"), minima)
    return [p1, p2]


TRR_COLUMNS = ("technique", "trr", "seed", "bitflips", "trr_refreshes")


def _trr_reports(rows: list[dict], out_dir: Path) -> list[Path]:
    p1 = write_csv(out_dir / "trr_bypass.csv", TRR_COLUMNS, rows)
    agg = []
    keys = sorted({(r["technique"], r["trr"]) for r in rows})
    for tech, trr in keys:
        sel = [r for r in rows if (r["technique"], r["trr"]) == (tech, trr)]
        agg.append(
            {
                "technique": tech,
                "trr": trr,
                "mean_bitflips": round(sum(r["bitflips"] for r in sel) / len(sel), 2),
                "seeds": len(sel),
            }
        )
    p2 = write_csv(
        out_dir / "trr_bypass_summary.csv",
        ("technique", "trr", "mean_bitflips", "seeds"),
        agg,
    )
    return [p1, p2]


def emit_report(results: list[dict], kind: str, out_dir: str | Path) -> list[Path]:
    """Write the CSVs for one report kind; returns the paths written."""
    if kind not in REPORT_KINDS:
        raise ConfigError(f"unknown report kind {kind!r}; expected {REPORT_KINDS}")
    if not results:
        raise ConfigError("emit_report: no result rows to aggregate")
    out = Path(out_dir)
    if kind == "characterize":
        paths = [write_csv(out / "results.csv", RESULT_COLUMNS, results)]
        paths.extend(_hc_reports(results, out))
        return paths
    if kind == "trr-eval":
        return _trr_reports(results, out)
    return [write_csv(out / "perf.csv", PERF_COLUMNS, results)]
