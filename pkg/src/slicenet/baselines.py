"""Comparison schemes: SINR-greedy association and utility-driven association.

Both keep AP powers fixed, pick slicing ratios with the same log-utility solver
as the proposed scheme, and split each station's budget equally among its users.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model import (Association, SlicingRatios, equal_allocation, p1_terms,
                    utility_from_terms, vehicle_rates)
from .qos import TrafficSpec, rate_floors
from .scenario import Scenario, link_sinr
from .solvers import AcsConfig, max_sinr_association, round_association, solve_p1

MAX_SINR = "max_sinr"
MAX_UTILITY = "max_utility"


@dataclass
class SchemeResult:
    scheme: str
    feasible: bool
    throughput: float | None        # bit/s, None when infeasible
    slicing: SlicingRatios
    assoc: Association
    rates: np.ndarray               # bit/s per vehicle
    p_ap: np.ndarray
    iterations: int = 1
    wall_s: float = 0.0


def _finish(scheme, scenario, qos, slicing, assoc, p_ap, iterations, t0) -> SchemeResult:
    alloc = equal_allocation(scenario, slicing, assoc)
    rates = vehicle_rates(scenario, assoc, alloc, p_ap)
    floors = rate_floors(scenario.sensitive, qos)
    ok = bool(np.all(rates >= floors * (1.0 - 1e-9)))
    return SchemeResult(scheme, ok, float(rates.sum()) if ok else None, slicing, assoc,
                        rates, p_ap, iterations, time.perf_counter() - t0)


def _fixed_powers(scenario: Scenario, fixed_powers) -> np.ndarray:
    if fixed_powers is None:
        return scenario.default_ap_power
    return np.broadcast_to(np.asarray(fixed_powers, float), (scenario.n_ap,)).copy()


def run_max_sinr(scenario: Scenario, qos: TrafficSpec, fixed_powers=None,
                 r_max_hz: float = 20e6) -> SchemeResult:
    t0 = time.perf_counter()
    p = _fixed_powers(scenario, fixed_powers)
    assoc = max_sinr_association(scenario, p)
    slicing = solve_p1(scenario, assoc, p, r_max_hz)
    return _finish(MAX_SINR, scenario, qos, slicing, assoc, p, 1, t0)


def equal_share_rates(scenario: Scenario, slicing: SlicingRatios, assoc: Association, p):
    """Per-vehicle equal-share rate on each side, with loads counted as if the vehicle
    had fully joined that side. This keeps the rate defined at empty stations."""
    e_enb, e_o, e_w = link_sinr(scenario, p).efficiency()
    xa = assoc.ap_share(scenario)
    m_cur = np.bincount(scenario.enb_of, weights=1.0 - xa, minlength=scenario.n_enb)
    n_cur = np.bincount(scenario.ap_of[scenario.in_ap], weights=xa[scenario.in_ap],
                        minlength=scenario.n_ap)
    grp = scenario.enb_group[scenario.enb_of]
    b_enb = np.array([slicing.group_budget(g) for g in grp])
    b_other = scenario.per_vehicle_ap([slicing.group_budget(3 - g) for g in scenario.ap_group])
    r_enb = e_enb * b_enb / (m_cur[scenario.enb_of] + xa)
    n_join = scenario.per_vehicle_ap(n_cur, 1.0) + 1.0 - xa
    r_ap = (e_o * b_other + e_w * slicing.wifi_budget) / n_join
    return r_enb, np.where(scenario.in_ap, r_ap, 0.0)


def run_max_utility(scenario: Scenario, qos: TrafficSpec, fixed_powers=None,
                    r_max_hz: float = 20e6, config: AcsConfig = AcsConfig()) -> SchemeResult:
    """Alternate log-utility slicing and a linearized association step, then round.

    The association step maximizes the first-order model of the log-utility over
    the relaxed association box. The load terms cancel in the derivative, which
    leaves the log ratio of a vehicle's AP and eNB equal-share rates, so the LP
    vertex is a per-vehicle pick of the better side. It is mixed in with the same
    feedback coefficients as ACS.
    """
    t0 = time.perf_counter()
    p = _fixed_powers(scenario, fixed_powers)
    assoc = max_sinr_association(scenario, p)
    xa = assoc.ap_share(scenario)
    u_prev, du_prev, first = 0.0, None, True
    it = 0
    for it in range(1, config.max_iters + 1):
        slicing = solve_p1(scenario, assoc, p, r_max_hz, config.p1_tol, config.p1_max_iter)
        r_enb, r_ap = equal_share_rates(scenario, slicing, assoc, p)
        target = np.where(scenario.in_ap & (r_ap >= r_enb), 1.0, 0.0)
        target_assoc = Association.from_ap_share(scenario, target)
        u = utility_from_terms(p1_terms(scenario, target_assoc, p),
                               slicing.as_array(), r_max_hz)
        if first:
            theta, first = 1.0, False
        else:
            theta = config.theta1 if du_prev > config.kappa2 else config.theta2
        xa = xa + theta * (target - xa)
        assoc = Association.from_ap_share(scenario, xa)
        du = abs(u - u_prev) if np.isfinite(u) and np.isfinite(u_prev) else np.inf
        if du <= config.kappa1:
            break
        u_prev, du_prev = u, du
    slicing = solve_p1(scenario, assoc, p, r_max_hz, config.p1_tol, config.p1_max_iter)
    rounded = round_association(assoc, scenario, slicing, p, qos)
    binary = rounded.assoc
    slicing = solve_p1(scenario, binary, p, r_max_hz, config.p1_tol, config.p1_max_iter)
    return _finish(MAX_UTILITY, scenario, qos, slicing, binary, p, it, t0)
