#!/usr/bin/env python3
"""Network throughput against aggregate spectrum W_v for the three schemes.

Density 0.05 AV/m; comparison schemes at 1 W fixed AP power. Runs once per
delay-sensitive probability and writes results.csv plus SVG charts per run.

    SLICENET_WORKERS=4 python scripts/run_spectrum_sweep.py --seeds 5
"""
import argparse
from dataclasses import replace
from pathlib import Path

from slicenet.config import RunConfig
from slicenet.harness import Axis, ExperimentPlan, emit_outputs, run_plan, summarize

W_V = (3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--p", type=float, nargs="+", default=[0.2, 0.8])
    ap.add_argument("--out", default="results/spectrum")
    args = ap.parse_args()

    for p in args.p:
        base = replace(RunConfig(), density=0.05, p_sensitive=p)
        plan = ExperimentPlan(Axis.AGGREGATE_SPECTRUM, W_V, tuple(range(args.seeds)), base=base)
        rows = run_plan(plan)
        out = Path(args.out) / f"p{p:g}"
        emit_outputs(rows, out, ("csv", "json"), plots=True)
        print(f"p = {p:g}  (mean Mbit/s over {args.seeds} seeds, N/A if any seed infeasible)")
        for scheme, pts in summarize(rows).items():
            vals = " ".join(f"{y:7.1f}" if y is not None else f"{'N/A':>7}" for _, y in pts)
            print(f"  {scheme:12s} {vals}")
        print(f"  written to {out}")


if __name__ == "__main__":
    main()
