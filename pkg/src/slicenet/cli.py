"""Command line entry point.

    slicenet run --config cfg.json
    slicenet sweep --config cfg.json --axis density --values 0.05,0.1 --seeds 5 --out results/ --plots
    slicenet validate --config cfg.json

Exit codes: 0 success, 1 infeasible (or a failed check), 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .harness import Axis, ExperimentPlan, emit_outputs, run_plan
from .model import constraint_residuals, solution_to_dict
from .scenario import ScenarioError, build_scenario
from .solvers import round_association, run_acs

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2


def _parse_values(text: str) -> tuple[float, ...]:
    if not text.strip():
        return ()
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"--values must be a comma-separated list of numbers, got {text!r}") from None


def _scenario(cfg: RunConfig):
    return build_scenario(cfg.road(), cfg.deployment(), p=cfg.p_sensitive, channel=cfg.channel())


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    scenario = _scenario(cfg)
    qos = cfg.traffic()
    sol, trace = run_acs(scenario, qos, cfg.acs(), r_max_hz=cfg.r_max_hz)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(trace.to_csv())
    if not sol.solved:
        print(json.dumps({"status": sol.status, "iterations": sol.iterations}, indent=2))
        return EXIT_INFEASIBLE
    rounded = round_association(sol.assoc, scenario, sol.slicing, sol.powers, qos)
    assoc, alloc = (rounded.assoc, rounded.alloc) if rounded.feasible else (sol.assoc, sol.alloc)
    out = {"status": sol.status, "iterations": sol.iterations, "restarts": sol.restarts,
           "rounded": rounded.feasible,
           **solution_to_dict(scenario, sol.slicing, assoc, alloc, sol.powers)}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    seeds = args.seeds if args.seeds is not None else cfg.seeds
    if seeds < 1:
        raise ConfigError("--seeds must be at least 1")
    plan = ExperimentPlan(Axis.parse(args.axis), _parse_values(args.values),
                          tuple(range(cfg.seed, cfg.seed + seeds)), cfg.schemes, cfg)
    rows = run_plan(plan)
    formats = ("csv", "json") if args.json else ("csv",)
    paths = emit_outputs(rows, args.out, formats, plots=args.plots and bool(rows))
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_validate(args) -> int:
    """Solve once and check the solution against every constraint family and block invariant."""
    cfg = load_config(args.config)
    scenario = _scenario(cfg)
    qos = cfg.traffic()
    sol, trace = run_acs(scenario, qos, cfg.acs(), r_max_hz=cfg.r_max_hz)
    checks: list[tuple[str, bool, str]] = []
    checks.append(("acs_solved", sol.solved, sol.status))
    if sol.solved:
        rep = constraint_residuals(scenario, sol.slicing, sol.assoc, sol.alloc, sol.powers, qos)
        for fam, worst in rep.worst().items():
            checks.append((f"residual_{fam}", worst >= -1e-6, f"{worst:.3e}"))
        b = sol.slicing.as_array()
        checks.append(("slicing_simplex", bool(np.all(b >= -1e-12) and abs(b.sum() - 1) < 1e-9),
                       np.array2string(b, precision=4)))
        p = sol.powers.p_ap
        checks.append(("power_box", bool(np.all((p > 0) & (p <= cfg.p_max_w + 1e-9))),
                       np.array2string(p, precision=4)))
        rounded = round_association(sol.assoc, scenario, sol.slicing, sol.powers, qos)
        checks.append(("rounded_feasible", rounded.feasible, f"flips={rounded.flips}"))
    ok = True
    for name, passed, detail in checks:
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
    return EXIT_OK if ok else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slicenet", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="single solve, prints the solution as JSON")
    r.add_argument("--config")
    r.add_argument("--trace", help="write the per-iteration trace CSV here")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one axis over seeds and schemes")
    s.add_argument("--config")
    s.add_argument("--axis", required=True, help="w_v | p | density")
    s.add_argument("--values", required=True, help="comma-separated axis values")
    s.add_argument("--seeds", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--plots", action="store_true")
    s.add_argument("--json", action="store_true", help="also write results.json")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="solve once and check constraints and invariants")
    v.add_argument("--config")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the config-error code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
