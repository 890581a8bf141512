#!/usr/bin/env python3
"""System-performance cost of per-row activation counting: weighted
speedup and overhead for naive vs weighted counting across random
multiprogrammed mixes and a sweep of group-op issue periods."""

import argparse
import sys
from statistics import mean

from pudsim.perf import evaluate_mixes, make_mixes
from pudsim.reports import emit_report


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mixes", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--periods", type=float, nargs="+",
                    default=[125.0, 250.0, 1000.0, 4000.0, 16000.0])
    ap.add_argument("--target-reqs", type=int, default=2000)
    ap.add_argument("--out", default="out/perf")
    args = ap.parse_args()

    rows = evaluate_mixes(make_mixes(args.mixes, args.seed),
                          periods=tuple(args.periods),
                          target_reqs=args.target_reqs)
    for period in args.periods:
        line = [f"period {period:>8.0f} ns:"]
        for variant in ("prac-po-naive", "prac-po-wc"):
            avg = mean(r["overhead_pct"] for r in rows
                       if r["mitigation"] == variant and r["period_ns"] == period)
            line.append(f"{variant} {avg:5.2f}%")
        print("  ".join(line))
    for path in emit_report(rows, "perf", args.out):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
