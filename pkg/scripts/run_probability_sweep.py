#!/usr/bin/env python3
"""Network throughput against the probability p of a delay-sensitive request.

Density 0.05 AV/m, 20 MHz; comparison schemes at 1 W fixed AP power.

    SLICENET_WORKERS=4 python scripts/run_probability_sweep.py --seeds 5
"""
import argparse
from pathlib import Path

from slicenet.config import RunConfig
from slicenet.harness import Axis, ExperimentPlan, emit_outputs, run_plan, summarize

P_VALUES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="results/probability")
    args = ap.parse_args()

    plan = ExperimentPlan(Axis.SENSITIVE_PROB, P_VALUES, tuple(range(args.seeds)),
                          base=RunConfig(density=0.05))
    rows = run_plan(plan)
    emit_outputs(rows, Path(args.out), ("csv", "json"), plots=True)
    for scheme, pts in summarize(rows).items():
        vals = " ".join(f"{y:7.1f}" if y is not None else f"{'N/A':>7}" for _, y in pts)
        print(f"{scheme:12s} {vals}")


if __name__ == "__main__":
    main()
