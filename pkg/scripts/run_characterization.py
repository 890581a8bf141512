#!/usr/bin/env python3
"""First-flip characterization sweep across kinds, temperatures and
open-row times.  Writes the distribution/minima CSVs under --out."""

import argparse
import sys

from pudsim.dram import SimraGroupMap, SubarrayLayout
from pudsim.harness import BisectionConfig, SweepGrid, run_sweep
from pudsim.profiles import available_profiles, load_profile
from pudsim.reports import emit_report


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--profile", default="skhynix_a_8gb",
                    choices=available_profiles())
    ap.add_argument("--rows", type=int, default=1024)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/characterize")
    ap.add_argument("--temps", type=float, nargs="+", default=[50.0, 65.0, 80.0])
    ap.add_argument("--t-aggons", type=float, nargs="+",
                    default=[36.0, 144.0, 7800.0, 70200.0])
    args = ap.parse_args()

    profile = load_profile(args.profile)
    layout = SubarrayLayout.uniform(args.rows, args.rows // 4)
    groups = SimraGroupMap.aligned_blocks(layout, 32, 1)
    grid = SweepGrid(
        kinds=("rowhammer", "comra", "simra"),
        ns=(2, 4, 8, 16, 32),
        temps=tuple(args.temps),
        t_aggons=tuple(args.t_aggons),
    )
    result = run_sweep(grid, profile, layout, groups, seed=args.seed,
                       search=BisectionConfig(tolerance=0.01, repeats=3))
    for failure in result.failures:
        print(f"warning: {failure}", file=sys.stderr)
    for path in emit_report(result.rows, "characterize", args.out):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
