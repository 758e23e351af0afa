"""Sweep orchestration: one row per (axis value, seed, scheme), then CSV/JSON/SVG output."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .baselines import run_max_sinr, run_max_utility
from .config import SCHEMES, ConfigError, RunConfig
from .model import vehicle_rates
from .plots import line_chart, stacked_bars
from .scenario import build_scenario
from .solvers import round_association, run_acs

log = logging.getLogger(__name__)

WORKERS_ENV = "SLICENET_WORKERS"


class Axis(str, Enum):
    AGGREGATE_SPECTRUM = "w_v"
    SENSITIVE_PROB = "p"
    AV_DENSITY = "density"

    @property
    def config_key(self) -> str:
        return {"w_v": "w_v_mhz", "p": "p_sensitive", "density": "density"}[self.value]

    @property
    def label(self) -> str:
        return {"w_v": "aggregate spectrum W_v (MHz)", "p": "delay-sensitive probability p",
                "density": "AV density (AV/m)"}[self.value]

    @classmethod
    def parse(cls, name: str) -> "Axis":
        aliases = {"w_v": cls.AGGREGATE_SPECTRUM, "wv": cls.AGGREGATE_SPECTRUM,
                   "spectrum": cls.AGGREGATE_SPECTRUM, "p": cls.SENSITIVE_PROB,
                   "sensitive_prob": cls.SENSITIVE_PROB, "density": cls.AV_DENSITY,
                   "av_density": cls.AV_DENSITY}
        try:
            return aliases[name.lower()]
        except KeyError:
            raise ConfigError(f"unknown sweep axis {name!r}") from None


@dataclass(frozen=True)
class ExperimentPlan:
    axis: Axis
    values: tuple[float, ...]
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    schemes: tuple[str, ...] = SCHEMES
    base: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        lo, hi = {Axis.AGGREGATE_SPECTRUM: (0.0, math.inf), Axis.SENSITIVE_PROB: (0.1, 0.9),
                  Axis.AV_DENSITY: (0.04, 0.20)}[self.axis]
        for v in self.values:
            ok = v > lo if self.axis == Axis.AGGREGATE_SPECTRUM else lo - 1e-12 <= v <= hi + 1e-12
            if not ok:
                raise ConfigError(f"{self.axis.value}={v} outside the allowed range")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme(s): {bad}")

    def cells(self):
        for v in self.values:
            for seed in self.seeds:
                for scheme in self.schemes:
                    yield v, seed, scheme


@dataclass
class ResultRow:
    seed: int
    axis: str
    value: float
    scheme: str
    feasible: bool
    throughput_bps: float | None
    beta1: float
    beta2: float
    beta_w: float
    p_ap: tuple[float, ...]
    iterations: int
    wall_s: float
    status: str = "ok"


CSV_COLUMNS = ("axis", "value", "seed", "scheme", "feasible", "throughput_bps",
               "beta1", "beta2", "beta_w", "p_ap_w", "iterations", "wall_s", "status")


def _nan_row(seed, axis, value, scheme, n_ap, status, wall) -> ResultRow:
    return ResultRow(seed, axis, value, scheme, False, None, math.nan, math.nan, math.nan,
                     (math.nan,) * n_ap, 0, wall, status)


def run_cell(base: RunConfig, axis: Axis, value: float, seed: int, scheme: str) -> ResultRow:
    """Evaluate one scheme on one drawn scenario. Solver failures become a row, not a raise."""
    t0 = time.perf_counter()
    cfg = base.with_value(axis.config_key, value)
    scenario = build_scenario(cfg.road(seed), cfg.deployment(), p=cfg.p_sensitive,
                              channel=cfg.channel())
    qos = cfg.traffic()
    try:
        if scheme == "proposed":
            return _run_proposed(cfg, scenario, qos, axis, value, seed, t0)
        fn = run_max_sinr if scheme == "max_sinr" else run_max_utility
        kw = {} if scheme == "max_sinr" else {"config": cfg.acs()}
        sc = scenario.with_ap_power(cfg.baseline_ap_power_w)
        res = fn(sc, qos, cfg.baseline_ap_power_w, cfg.r_max_hz, **kw)
        b = res.slicing.as_array()
        return ResultRow(seed, axis.value, value, scheme, res.feasible, res.throughput,
                         *map(float, b), tuple(map(float, res.p_ap)), res.iterations,
                         time.perf_counter() - t0, "ok" if res.feasible else "qos_infeasible")
    except Exception as exc:   # recorded, sweep continues
        log.exception("cell failed: %s %s seed=%s", scheme, value, seed)
        return _nan_row(seed, axis.value, value, scheme, scenario.n_ap,
                        f"error: {type(exc).__name__}", time.perf_counter() - t0)


def _run_proposed(cfg, scenario, qos, axis, value, seed, t0) -> ResultRow:
    sol, _ = run_acs(scenario, qos, cfg.acs(), r_max_hz=cfg.r_max_hz)
    wall = time.perf_counter() - t0
    if not sol.solved:
        return _nan_row(seed, axis.value, value, "proposed", scenario.n_ap, sol.status, wall)
    rounded = round_association(sol.assoc, scenario, sol.slicing, sol.powers, qos)
    if rounded.feasible:
        thr = float(vehicle_rates(scenario, rounded.assoc, rounded.alloc, sol.powers).sum())
        status = sol.status
    else:
        # keep the relaxed solution's throughput and flag it
        thr = float(vehicle_rates(scenario, sol.assoc, sol.alloc, sol.powers).sum())
        status = sol.status + ",fractional"
    b = sol.slicing.as_array()
    return ResultRow(seed, axis.value, value, "proposed", True, thr, *map(float, b),
                     tuple(map(float, sol.powers.p_ap)), sol.iterations,
                     time.perf_counter() - t0, status)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1")
    return n


def run_plan(plan: ExperimentPlan, workers: int | None = None) -> list[ResultRow]:
    cells = list(plan.cells())
    if not cells:
        return []
    workers = worker_count() if workers is None else workers
    args = [(plan.base, plan.axis, v, s, sch) for v, s, sch in cells]
    if workers == 1:
        rows = [run_cell(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
            rows = list(pool.map(run_cell, *zip(*args)))
    # executor.map preserves order; sort anyway so output never depends on scheduling
    order = {s: i for i, s in enumerate(plan.schemes)}
    rows.sort(key=lambda r: (r.value, r.seed, order[r.scheme]))
    return rows


# ---------------------------------------------------------------------------
# output

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, tuple):
        return ";".join(_cell(x) for x in v)
    return str(v)


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        d = asdict(r)
        d["p_ap_w"] = tuple(d.pop("p_ap"))
        w.writerow([_cell(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_json(rows: list[ResultRow]) -> str:
    def clean(v):
        if isinstance(v, float) and math.isnan(v):
            return None
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v
    out = [{k: clean(v) for k, v in asdict(r).items()} for r in rows]
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def summarize(rows: list[ResultRow]) -> dict[str, list[tuple[float, float | None]]]:
    """Mean throughput (Mbit/s) per scheme and axis value over feasible rows.

    A point counts as feasible only if every seed at that value was feasible, since
    a mean over the lucky draws would overstate the scheme.
    """
    out: dict[str, list[tuple[float, float | None]]] = {}
    for scheme in dict.fromkeys(r.scheme for r in rows):
        pts = []
        for v in sorted({r.value for r in rows if r.scheme == scheme}):
            sel = [r for r in rows if r.scheme == scheme and r.value == v]
            if sel and all(r.feasible for r in sel):
                pts.append((v, float(np.mean([r.throughput_bps for r in sel])) / 1e6))
            else:
                pts.append((v, None))
        out[scheme] = pts
    return out


def emit_outputs(rows: list[ResultRow], out_dir: str | Path, formats=("csv",),
                 plots: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        written.append(out / "results.csv")
        written[-1].write_text(rows_to_csv(rows))
    if "json" in formats:
        written.append(out / "results.json")
        written[-1].write_text(rows_to_json(rows))
    if plots:
        if not rows:
            raise ValueError("plots need at least one row")
        axis = Axis(rows[0].axis)
        thr = line_chart(summarize(rows), "Network throughput", axis.label, "throughput (Mbit/s)")
        written.append(out / "throughput.svg")
        written[-1].write_text(thr)
        prop = [r for r in rows if r.scheme == "proposed" and r.feasible]
        vals = sorted({r.value for r in prop})
        stacks = {name: [float(np.mean([getattr(r, name) for r in prop if r.value == v]))
                         for v in vals] for name in ("beta1", "beta2", "beta_w")}
        svg = stacked_bars(vals, stacks, "Spectrum slicing ratios (proposed)", axis.label, "ratio")
        written.append(out / "slicing.svg")
        written[-1].write_text(svg)
    return written
