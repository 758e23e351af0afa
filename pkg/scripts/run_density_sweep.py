#!/usr/bin/env python3
"""Network throughput and slicing ratios against AV density.

20 MHz aggregate spectrum; comparison schemes at 1 W fixed AP power. The
slicing chart shows how the proposed scheme splits spectrum between the two
eNB groups and the shared Wi-Fi slice as density grows.

    SLICENET_WORKERS=4 python scripts/run_density_sweep.py --seeds 3
"""
import argparse
from dataclasses import replace
from pathlib import Path

from slicenet.config import RunConfig
from slicenet.harness import Axis, ExperimentPlan, emit_outputs, run_plan, summarize

DENSITIES = (0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--p", type=float, nargs="+", default=[0.2, 0.8])
    ap.add_argument("--out", default="results/density")
    args = ap.parse_args()

    for p in args.p:
        base = replace(RunConfig(), p_sensitive=p)
        plan = ExperimentPlan(Axis.AV_DENSITY, DENSITIES, tuple(range(args.seeds)), base=base)
        rows = run_plan(plan)
        out = Path(args.out) / f"p{p:g}"
        emit_outputs(rows, out, ("csv", "json"), plots=True)
        print(f"p = {p:g}")
        for scheme, pts in summarize(rows).items():
            vals = " ".join(f"{y:7.1f}" if y is not None else f"{'N/A':>7}" for _, y in pts)
            print(f"  {scheme:12s} {vals}")
        prop = [r for r in rows if r.scheme == "proposed" and r.feasible]
        for d in DENSITIES:
            sel = [r for r in prop if r.value == d]
            if sel:
                bw = sum(r.beta_w for r in sel) / len(sel)
                print(f"  density {d:.2f}: mean beta_w {bw:.4f} over {len(sel)} runs")


if __name__ == "__main__":
    main()
