"""Block solvers for slicing, allocation, association and AP power, plus the ACS driver."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .model import (X_EPS, Allocation, Association, P1Terms, PowerAndSinr, SlicingRatios,
                    budget_usage, link_rates, p1_terms, throughput_objective,
                    utility_from_terms, utility_gradient)
from .qos import TrafficSpec, rate_floors
from .scenario import Scenario, link_sinr

log = logging.getLogger(__name__)

MHZ = 1e6
FLOOR_RTOL = 1e-9


class QosInfeasible(RuntimeError):
    """No allocation/association meets every QoS floor for the given inputs."""


# ---------------------------------------------------------------------------
# slicing ratios: projected gradient ascent on the simplex

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def p1_kkt_residual(terms: P1Terms, beta: np.ndarray) -> float:
    """Norm of the projected-gradient map; zero exactly at a simplex KKT point."""
    g = utility_gradient(terms, beta)
    scale = max(np.abs(g).max(), 1e-300)
    return float(np.abs(beta - project_simplex(beta + g / scale)).max())


def _drop_dead_terms(terms: P1Terms) -> P1Terms:
    live = np.abs(terms.coef).sum(axis=1) > 0
    return P1Terms(terms.weight[live], terms.coef[live], terms.load[live])


def _face_newton_step(terms: P1Terms, beta: np.ndarray, g: np.ndarray) -> np.ndarray | None:
    """Newton direction for the log-utility restricted to the face where beta > 0."""
    free = beta > 1e-12
    n = int(free.sum())
    if n < 2:
        return None
    lin = terms.coef @ beta
    hess = -(terms.coef * (terms.weight / lin**2)[:, None]).T @ terms.coef
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = hess[np.ix_(free, free)]
    kkt[:n, n] = kkt[n, :n] = 1.0
    rhs = np.append(-g[free], 0.0)
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    d = np.zeros(3)
    d[free] = sol[:n]
    return d if np.all(np.isfinite(d)) else None


def maximize_p1(terms: P1Terms, r_max_hz: float, tol: float = 1e-8,
                max_iter: int = 10_000, beta0=None) -> tuple[np.ndarray, int]:
    terms = _drop_dead_terms(terms)
    beta = np.full(3, 1 / 3) if beta0 is None else project_simplex(np.asarray(beta0, float))
    if terms.weight.size == 0:
        return np.full(3, 1 / 3), 0
    f = utility_from_terms(terms, beta, r_max_hz)
    if not np.isfinite(f):
        beta = np.full(3, 1 / 3)
        f = utility_from_terms(terms, beta, r_max_hz)
    g = utility_gradient(terms, beta)
    step = 1.0 / max(np.abs(g).max(), 1e-12)
    res = p1_kkt_residual(terms, beta)
    for it in range(1, max_iter + 1):
        if res <= tol:
            return beta, it - 1
        g = utility_gradient(terms, beta)
        # projected gradient steps find the active face; Newton on that face
        # removes the zig-zag that plain gradient steps show near a boundary
        d = _face_newton_step(terms, beta, g)
        if d is not None and np.all(beta + d >= 0.0):
            cand = project_simplex(beta + d)
            fc = utility_from_terms(terms, cand, r_max_hz)
            rc = p1_kkt_residual(terms, cand) if np.isfinite(fc) else np.inf
            if fc >= f + 1e-4 * (g @ (cand - beta)) or (fc >= f - 1e-12 * abs(f) and rc < res):
                beta, f, res = cand, fc, rc
                continue
        while True:
            cand = project_simplex(beta + step * g)
            fc = utility_from_terms(terms, cand, r_max_hz)
            if fc >= f + 1e-4 * g @ (cand - beta) or step < 1e-18:
                break
            step *= 0.5
        moved = np.abs(cand - beta).max()
        if fc >= f:
            beta, f = cand, fc
            res = p1_kkt_residual(terms, beta)
        if moved <= tol * 1e-3:
            return beta, it
        step *= 2.0
    return beta, max_iter


def solve_p1(scenario: Scenario, assoc: Association, powers, r_max_hz: float = 20e6,
             tol: float = 1e-8, max_iter: int = 10_000) -> SlicingRatios:
    """Slicing ratios maximizing the equal-share log utility."""
    if scenario.n_vehicles == 0:
        return SlicingRatios.uniform(r_max_hz)
    beta, _ = maximize_p1(p1_terms(scenario, assoc, powers), r_max_hz, tol, max_iter)
    return SlicingRatios.from_array(beta, r_max_hz)


# ---------------------------------------------------------------------------
# allocation block: one LP per station (stations share no constraints)

def _powers_vec(scenario: Scenario, powers) -> np.ndarray:
    if isinstance(powers, PowerAndSinr):
        return powers.p_ap
    return scenario.default_ap_power if powers is None else np.asarray(powers, dtype=float)


def solve_p2_allocation(scenario: Scenario, slicing: SlicingRatios, assoc: Association,
                        powers, qos: TrafficSpec) -> Allocation:
    """Throughput-maximizing spectrum split for fixed association and slicing.

    Raises QosInfeasible when some station cannot meet its associated floors.
    """
    e_enb, e_o, e_w = link_sinr(scenario, _powers_vec(scenario, powers)).efficiency()
    floor = rate_floors(scenario.sensitive, qos) / MHZ
    xa = assoc.ap_share(scenario)
    xe = 1.0 - xa
    n = scenario.n_vehicles
    re, ro, rw = np.zeros(n), np.zeros(n), np.zeros(n)

    for j in range(scenario.n_enb):
        mem = np.flatnonzero((scenario.enb_of == j) & (xe > X_EPS))
        if mem.size == 0:
            continue
        budget = slicing.group_budget(scenario.enb_group[j]) / MHZ
        e = e_enb[mem]
        if np.any((e <= 0) & (floor[mem] > 0)):
            raise QosInfeasible(f"eNB {j}: zero spectrum efficiency for an associated vehicle")
        lb = floor[mem] / e
        rhs = budget - xe[mem] @ lb
        res = simplex.linprog_max(xe[mem] * e, A_eq=xe[mem][None, :], b_eq=[rhs])
        if not res.success:
            raise QosInfeasible(f"eNB {j}: floors need {xe[mem] @ lb:.4f} MHz of {budget:.4f}")
        re[mem] = (lb + res.x) * MHZ

    for i in range(scenario.n_ap):
        mem = np.flatnonzero((scenario.ap_of == i) & (xa > X_EPS))
        if mem.size == 0:
            continue
        m = mem.size
        b_o = slicing.group_budget(3 - scenario.ap_group[i]) / MHZ
        b_w = slicing.wifi_budget / MHZ
        w = xa[mem]
        c = np.concatenate([w * e_o[mem], w * e_w[mem]])
        A_eq = np.zeros((2, 2 * m))
        A_eq[0, :m] = w
        A_eq[1, m:] = w
        A_ub = np.hstack([-np.diag(e_o[mem]), -np.diag(e_w[mem])])
        res = simplex.linprog_max(c, A_ub, -floor[mem], A_eq, [b_o, b_w])
        if not res.success:
            raise QosInfeasible(f"AP {i}: {res.status}")
        ro[mem] = res.x[:m] * MHZ
        rw[mem] = res.x[m:] * MHZ
    return Allocation.from_vectors(scenario, re, ro, rw)


@dataclass(frozen=True)
class AssociationLP:
    """Association block as an LP over the AP share of each covered vehicle.

    Variables are (x_enb, x_ap) per vehicle in ``veh``; columns of sides that
    miss the floor are absent (their weight is fixed to zero).
    """
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    veh: np.ndarray
    col_vehicle: np.ndarray
    col_is_ap: np.ndarray


def budget_prices(scenario: Scenario, alloc: Allocation, powers):
    """Marginal throughput per Hz of each budget (eNB, AP other slice, AP Wi-Fi slice).

    At the allocation optimum spare spectrum goes to the most efficient member,
    so the price is the best member efficiency; an idle budget is free.
    """
    e_enb, e_o, e_w = link_sinr(scenario, _powers_vec(scenario, powers)).efficiency()
    re, ro, rw = alloc.vectors(scenario)
    pe = np.zeros(scenario.n_enb)
    po = np.zeros(scenario.n_ap)
    pw = np.zeros(scenario.n_ap)
    for j in range(scenario.n_enb):
        mem = (scenario.enb_of == j) & (re > 0)
        if mem.any():
            pe[j] = e_enb[mem].max()
    for i in range(scenario.n_ap):
        mem = (scenario.ap_of == i) & (ro + rw > 0)
        if mem.any():
            po[i] = e_o[mem].max()
            pw[i] = e_w[mem].max()
    return pe, po, pw


def association_lp(scenario: Scenario, slicing: SlicingRatios, alloc: Allocation,
                   powers, qos: TrafficSpec) -> AssociationLP:
    """Build the association LP for a fixed allocation.

    Each side is valued at its rate minus the priced spectrum it holds; a side
    the vehicle is not served on is valued at the floor-meeting allocation on
    its cheapest slice. Floor-meeting spectrum per budget may not exceed the
    budget, which keeps the next allocation solve feasible.
    """
    sc = scenario
    p = _powers_vec(sc, powers)
    e_enb, e_o, e_w = link_sinr(sc, p).efficiency()
    re, ro, rw = alloc.vectors(sc)
    floor = rate_floors(sc.sensitive, qos)
    pe, po, pw = budget_prices(sc, alloc, p)
    veh = np.flatnonzero(sc.in_ap)
    i_ap = sc.ap_of[veh]
    j_enb = sc.enb_of[veh]
    f = floor[veh]
    b_o = np.array([slicing.group_budget(3 - g) for g in sc.ap_group])
    b_w = np.full(sc.n_ap, slicing.wifi_budget)
    b_e = np.array([slicing.group_budget(g) for g in sc.enb_group])

    with np.errstate(divide="ignore", invalid="ignore"):
        need_e = np.where(e_enb[veh] > 0, f / e_enb[veh], np.inf)
        need_o = np.where(e_o[veh] > 0, f / e_o[veh], np.inf)
        need_w = np.where(e_w[veh] > 0, f / e_w[veh], np.inf)
    # a slice whose whole budget cannot carry this vehicle's floor is no option for it
    need_o[need_o > b_o[i_ap]] = np.inf
    need_w[need_w > b_w[i_ap]] = np.inf
    with np.errstate(invalid="ignore"):
        cost_o = np.where(np.isfinite(need_o), po[i_ap] * need_o, np.inf)
        cost_w = np.where(np.isfinite(need_w), pw[i_ap] * need_w, np.inf)
    use_w = (cost_w < cost_o) | ((cost_w == cost_o) & (need_w < need_o))
    need_a = np.where(use_w, need_w, need_o)

    g_e_act = re[veh] * e_enb[veh]
    g_a_act = ro[veh] * e_o[veh] + rw[veh] * e_w[veh]
    served_e = re[veh] > 0
    served_a = (ro[veh] + rw[veh]) > 0
    val_e = np.where(served_e, g_e_act - pe[j_enb] * re[veh], f - pe[j_enb] * need_e)
    val_a = np.where(served_a, g_a_act - po[i_ap] * ro[veh] - pw[i_ap] * rw[veh],
                     f - np.where(use_w, cost_w, cost_o))
    rate_e = np.where(served_e, g_e_act, f)
    rate_a = np.where(served_a, g_a_act, f)
    open_e = np.where(served_e, g_e_act >= f * (1 - FLOOR_RTOL), np.isfinite(need_e))
    open_a = np.where(served_a, g_a_act >= f * (1 - FLOOR_RTOL), np.isfinite(need_a))

    m = veh.size
    col_v = np.concatenate([np.arange(m), np.arange(m)])
    col_ap = np.concatenate([np.zeros(m, bool), np.ones(m, bool)])
    keep = np.concatenate([open_e, open_a])
    # ties go to the higher rate, then to the AP
    c = np.concatenate([val_e, val_a]) / MHZ + 1e-9 * np.concatenate([rate_e, rate_a + 1e-3]) / MHZ
    need = np.concatenate([np.where(np.isfinite(need_e), need_e, 0.0),
                           np.where(np.isfinite(need_a), need_a, 0.0)]) / MHZ
    n_b = sc.n_enb + 2 * sc.n_ap
    rows = np.concatenate([j_enb, np.where(use_w, sc.n_enb + 2 * i_ap + 1, sc.n_enb + 2 * i_ap)])
    A_cap = np.zeros((n_b, 2 * m))
    A_cap[rows, np.arange(2 * m)] = need
    b_cap = np.concatenate([b_e, np.ravel(np.column_stack([b_o, b_w]))]) / MHZ
    # vehicles outside AP coverage use eNB spectrum unconditionally
    fixed = np.zeros(n_b)
    out = ~sc.in_ap
    with np.errstate(divide="ignore"):
        fixed[:sc.n_enb] = np.bincount(sc.enb_of[out], weights=floor[out] / e_enb[out],
                                       minlength=sc.n_enb) / MHZ
    b_cap = np.maximum(b_cap - fixed, 0.0)
    A_eq = np.zeros((m, 2 * m))
    A_eq[col_v, np.arange(2 * m)] = 1.0
    used = A_cap.any(axis=1)
    return AssociationLP(c[keep], A_cap[used][:, keep], b_cap[used], A_eq[:, keep], np.ones(m),
                         veh, col_v[keep], col_ap[keep])


def solve_p2_association(scenario: Scenario, slicing: SlicingRatios, alloc: Allocation,
                         powers, qos: TrafficSpec,
                         incumbent: Association | None = None) -> Association:
    """Relaxed association for a fixed allocation (see ``association_lp``).

    The capacity rows pack each side's floor onto one slice, which is stricter
    than the allocation block; when they admit no point the incumbent (if given)
    is returned unchanged. Otherwise raises QosInfeasible.
    """
    lp = association_lp(scenario, slicing, alloc, powers, qos)
    share = np.zeros(scenario.n_vehicles)
    if lp.veh.size == 0:
        return Association.from_ap_share(scenario, share)
    if not np.all(np.bincount(lp.col_vehicle, minlength=lp.veh.size)):
        if incumbent is not None:
            return incumbent
        raise QosInfeasible("a vehicle meets its floor at neither station")
    res = simplex.linprog_max(lp.c, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq)
    if not res.success:
        if incumbent is not None:
            return incumbent
        raise QosInfeasible(f"association LP: {res.status}")
    np.add.at(share, lp.veh[lp.col_vehicle[lp.col_is_ap]], res.x[lp.col_is_ap])
    return Association.from_ap_share(scenario, np.clip(share, 0.0, 1.0))


# ---------------------------------------------------------------------------
# AP power: SINR closed form alternating with a linearized power LP

@dataclass(frozen=True)
class LinkForms:
    """Every served link's SINR as (S @ p + s0) / (Q @ p + q0), p = AP powers.

    Rows are grouped as eNB links, AP other-slice links, AP Wi-Fi links;
    ``veh`` and ``weight`` (association x spectrum, Hz) are per row.
    """
    S: np.ndarray
    s0: np.ndarray
    Q: np.ndarray
    q0: np.ndarray
    veh: np.ndarray
    weight: np.ndarray
    station: np.ndarray   # ("e", j) rows use eNB index, AP rows use AP index
    kind: np.ndarray      # 0 eNB, 1 AP other slice, 2 AP Wi-Fi slice

    def sinr(self, p: np.ndarray) -> np.ndarray:
        return (self.S @ p + self.s0) / (self.Q @ p + self.q0)

    def sinr_grad(self, p: np.ndarray) -> np.ndarray:
        den = self.Q @ p + self.q0
        xi = (self.S @ p + self.s0) / den
        return (self.S - xi[:, None] * self.Q) / den[:, None]


def link_forms(scenario: Scenario, assoc: Association, alloc: Allocation) -> LinkForms:
    sc = scenario
    xa = assoc.ap_share(sc)
    xe = 1.0 - xa
    re, ro, rw = alloc.vectors(sc)
    noise = sc.noise_w
    rows = []
    for k in np.flatnonzero(xe > X_EPS):
        j = sc.enb_of[k]
        grp = sc.enb_group[j]
        same = sc.enb_group == grp
        same[j] = False
        q = np.where(sc.ap_group != grp, sc.g_ap[:, k], 0.0)
        q0 = sc.enb_power[same] @ sc.g_enb[same, k] + noise
        rows.append((np.zeros(sc.n_ap), sc.enb_power[j] * sc.g_enb[j, k], q, q0,
                     k, xe[k] * re[k], j, 0))
    for k in np.flatnonzero((xa > X_EPS) & sc.in_ap):
        i = sc.ap_of[k]
        grp = sc.ap_group[i]
        s = np.zeros(sc.n_ap)
        s[i] = sc.g_ap[i, k]
        q_o = np.where(sc.ap_group == grp, sc.g_ap[:, k], 0.0)
        q_o[i] = 0.0
        enb_other = sc.enb_group != grp
        q0_o = sc.enb_power[enb_other] @ sc.g_enb[enb_other, k] + noise
        rows.append((s, 0.0, q_o, q0_o, k, xa[k] * ro[k], i, 1))
        q_w = sc.g_ap[:, k].copy()
        q_w[i] = 0.0
        rows.append((s, 0.0, q_w, noise, k, xa[k] * rw[k], i, 2))
    if not rows:
        z = np.zeros((0, sc.n_ap))
        e = np.zeros(0)
        return LinkForms(z, e, z, e, e.astype(int), e, e.astype(int), e.astype(int))
    S, s0, Q, q0, veh, w, st, kd = zip(*rows)
    return LinkForms(np.array(S), np.array(s0, float), np.array(Q), np.array(q0, float),
                     np.array(veh), np.array(w, float), np.array(st), np.array(kd))


def _station_keys(forms: LinkForms) -> np.ndarray:
    """Budget id per link row: eNB j -> j, AP slice -> offset ids."""
    big = 1 + forms.station.max(initial=0)
    return np.where(forms.kind == 0, forms.station,
                    np.where(forms.kind == 1, big + 2 * forms.station,
                             big + 2 * forms.station + 1))


class _PowerProblem:
    """Objective and spectrum-requirement model used by the power rounds."""

    def __init__(self, scenario: Scenario, slicing: SlicingRatios, assoc: Association,
                 alloc: Allocation, qos: TrafficSpec):
        self.sc = scenario
        self.f = link_forms(scenario, assoc, alloc)
        floor = rate_floors(scenario.sensitive, qos)
        f = self.f
        xa = assoc.ap_share(scenario)
        # per-link spectrum (not association weighted) for rate computation
        x = np.where(f.kind == 0, 1.0 - xa[f.veh], xa[f.veh])
        self.x = x
        self.spec = np.where(x > 0, f.weight / np.maximum(x, 1e-300), 0.0)
        self.floor_v = floor[f.veh]
        keys = _station_keys(f)
        self.keys, self.key_idx = np.unique(keys, return_inverse=True)
        budgets = np.empty(self.keys.size)
        for u, key in enumerate(self.keys):
            row = np.flatnonzero(keys == key)[0]
            if f.kind[row] == 0:
                budgets[u] = slicing.group_budget(scenario.enb_group[f.station[row]])
            elif f.kind[row] == 1:
                budgets[u] = slicing.group_budget(3 - scenario.ap_group[f.station[row]])
            else:
                budgets[u] = slicing.wifi_budget
        self.budgets = budgets
        # a vehicle's rate at a station combines its link rows there (two for APs)
        self.grp = f.veh * 2 + (f.kind > 0)
        self.grp_u, self.grp_idx = np.unique(self.grp, return_inverse=True)

    def rates(self, p):
        eff = np.log2(1.0 + self.f.sinr(p))
        return np.bincount(self.grp_idx, weights=self.spec * eff, minlength=self.grp_u.size)

    def objective(self, p) -> float:
        return float(self.f.weight @ np.log2(1.0 + self.f.sinr(p)))

    def objective_grad(self, p) -> np.ndarray:
        xi = self.f.sinr(p)
        return (self.f.weight / ((1 + xi) * math.log(2))) @ self.f.sinr_grad(p)

    def requirement(self, p) -> np.ndarray:
        """Hz each budget needs when every vehicle is scaled to exactly its floor."""
        gam = self.rates(p)[self.grp_idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(gam > 0, self.floor_v / gam, np.inf)
            need = np.where(self.spec > 0, self.x * scale * self.spec, 0.0)
        return np.bincount(self.key_idx, weights=need, minlength=self.keys.size)

    def requirement_jac(self, p) -> np.ndarray:
        f = self.f
        xi = f.sinr(p)
        d_eff = f.sinr_grad(p) / ((1 + xi) * math.log(2))[:, None]
        d_gam_rows = self.spec[:, None] * d_eff
        d_gam = np.zeros((self.grp_u.size, p.size))
        np.add.at(d_gam, self.grp_idx, d_gam_rows)
        gam = self.rates(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            d_scale = -(self.floor_v / gam[self.grp_idx] ** 2)[:, None] * d_gam[self.grp_idx]
        d_scale[~np.isfinite(d_scale)] = 0.0
        rows = (self.x * self.spec)[:, None] * d_scale
        J = np.zeros((self.keys.size, p.size))
        np.add.at(J, self.key_idx, rows)
        return J


@dataclass
class PowerResult:
    powers: PowerAndSinr
    rounds: int
    objective: float


def solve_p3(scenario: Scenario, slicing: SlicingRatios, assoc: Association,
             alloc: Allocation, qos: TrafficSpec, powers_init, *,
             max_rounds: int = 50, tol_w: float = 1e-6, trust_w: float = 0.5) -> PowerResult:
    """AP powers for fixed slicing, association and allocation.

    Alternates the closed-form SINR block (auxiliaries equal the true SINRs)
    with a power LP that maximizes the spectrum-weighted, normalized slack of
    the cleared SINR constraints, i.e. the first-order model of the objective
    around the incumbent. Spectrum the QoS floors would require after
    re-allocation may not exceed the budget (or the incumbent's need, when
    already above it). Steps are accepted only if the exact objective rises.
    """
    p_max = scenario.p_max_w
    p = np.clip(_powers_vec(scenario, powers_init).astype(float), 0.0, p_max)
    prob = _PowerProblem(scenario, slicing, assoc, alloc, qos)
    obj = prob.objective(p)
    if prob.f.weight.size == 0 or scenario.n_ap == 0:
        return PowerResult(PowerAndSinr.from_powers(scenario, p), 0, obj)
    cap = np.maximum(prob.budgets, prob.requirement(p)) * (1 + 1e-12)
    delta = trust_w
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        # SP1: auxiliary SINRs bind at the current powers
        c_aux = prob.f.sinr(p)
        den0 = prob.f.Q @ p + prob.f.q0
        wts = prob.f.weight / ((1 + c_aux) * math.log(2) * den0)
        # SP2: slack of C * (Q p + q0) <= S p + s0, linear in p
        c_lp = wts @ (prob.f.S - c_aux[:, None] * prob.f.Q)
        J = prob.requirement_jac(p)
        need0 = prob.requirement(p)
        lo = np.maximum(p - delta, 0.0)
        hi = np.minimum(p + delta, p_max)
        # variables d = p_new - lo >= 0
        A_ub = np.vstack([np.eye(p.size), J / MHZ])
        b_ub = np.concatenate([hi - lo, (cap - need0 - J @ (lo - p)) / MHZ])
        res = simplex.linprog_max(c_lp / max(np.abs(c_lp).max(), 1e-300), A_ub, b_ub)
        if not res.success:
            # incumbent stays feasible; the linear model just cannot certify a move
            delta *= 0.5
            if delta < tol_w:
                break
            continue
        p_new = lo + res.x
        step = np.abs(p_new - p).max()
        if step < tol_w:
            break
        obj_new = prob.objective(p_new)
        if obj_new > obj and np.all(prob.requirement(p_new) <= cap):
            p, obj = p_new, obj_new
        else:
            delta = 0.5 * min(delta, step)
            if delta < tol_w:
                break
    return PowerResult(PowerAndSinr.from_powers(scenario, p), rounds, obj)


# ---------------------------------------------------------------------------
# association helpers

def max_sinr_association(scenario: Scenario, powers=None) -> Association:
    """Each covered vehicle picks the station with the larger received SINR (ties to AP)."""
    s = link_sinr(scenario, _powers_vec(scenario, powers))
    ap_best = np.maximum(s.other, s.wifi)
    share = (scenario.in_ap & (ap_best >= s.enb)).astype(float)
    return Association.from_ap_share(scenario, share)


@dataclass
class RoundingResult:
    assoc: Association
    alloc: Allocation | None
    feasible: bool
    flips: int = 0


def round_association(assoc: Association, scenario: Scenario, slicing: SlicingRatios,
                      powers, qos: TrafficSpec, max_flips: int = 50) -> RoundingResult:
    """Threshold the relaxed association at 0.5 and repair QoS by greedy flips."""
    share = assoc.ap_share(scenario)
    binary = np.where(scenario.in_ap & (share >= 0.5), 1.0, 0.0)
    order = np.argsort(np.abs(share - 0.5), kind="stable")
    order = [k for k in order if scenario.in_ap[k]]
    cur = binary.copy()
    for flips in range(0, min(max_flips, len(order)) + 1):
        if flips:
            k = order[flips - 1]
            cur[k] = 1.0 - cur[k]
        cand = Association.from_ap_share(scenario, cur)
        try:
            alloc = solve_p2_allocation(scenario, slicing, cand, powers, qos)
            return RoundingResult(cand, alloc, True, flips)
        except QosInfeasible:
            continue
    return RoundingResult(Association.from_ap_share(scenario, binary), None, False, max_flips)


# ---------------------------------------------------------------------------
# ACS driver

@dataclass(frozen=True)
class AcsConfig:
    kappa1: float = 0.01
    kappa2: float = 20.0
    theta1: float = 0.001
    theta2: float = 0.1
    max_iters: int = 100
    utility_unit: float = 1e6      # U is compared in Mbit/s
    p1_tol: float = 1e-8
    p1_max_iter: int = 10_000
    p3_rounds: int = 50
    p3_tol_w: float = 1e-6

    def __post_init__(self):
        if not self.kappa2 > self.kappa1:
            raise ValueError("kappa2 must exceed kappa1")
        for t in (self.theta1, self.theta2):
            if not 0.0 < t <= 1.0:
                raise ValueError("feedback coefficients must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class AcsInit:
    assoc: Association | None = None
    p_ap: np.ndarray | None = None


@dataclass
class TraceRow:
    iteration: int
    utility: float                 # bit/s
    beta: tuple[float, float, float]
    feasible: bool
    p_ap: tuple[float, ...]
    theta: float


@dataclass
class AcsTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def to_csv(self) -> str:
        n_ap = len(self.rows[0].p_ap) if self.rows else 0
        head = ["iteration", "utility_bps", "beta1", "beta2", "beta_w", "feasible", "theta"]
        head += [f"p_ap{i + 1}_w" for i in range(n_ap)]
        lines = [",".join(head)]
        for r in self.rows:
            vals = [str(r.iteration), f"{r.utility:.6f}", *(f"{b:.9f}" for b in r.beta),
                    str(int(r.feasible)), f"{r.theta:g}", *(f"{p:.9f}" for p in r.p_ap)]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


@dataclass
class AcsSolution:
    status: str                     # "converged", "max_iters", "no_solution"
    slicing: SlicingRatios | None
    assoc: Association | None
    alloc: Allocation | None
    powers: PowerAndSinr | None
    utility: float
    iterations: int
    restarts: int = 0

    @property
    def solved(self) -> bool:
        return self.status in ("converged", "max_iters")


def run_acs(scenario: Scenario, qos: TrafficSpec, config: AcsConfig = AcsConfig(),
            init: AcsInit | None = None, r_max_hz: float = 20e6) -> tuple[AcsSolution, AcsTrace]:
    """Alternate the slicing, allocation, association and power blocks with damped feedback."""
    init = init or AcsInit()
    p_init = scenario.default_ap_power if init.p_ap is None else np.asarray(init.p_ap, float)
    assoc0 = init.assoc or max_sinr_association(scenario, p_init)
    trace = AcsTrace()
    restarts = 0
    forced_beta = None
    while True:
        try:
            sol = _acs_loop(scenario, qos, config, assoc0, p_init, r_max_hz, trace, forced_beta)
            sol.restarts = restarts
            return sol, trace
        except QosInfeasible as exc:
            log.info("ACS infeasible (%s)", exc)
            trace.rows.append(TraceRow(len(trace.rows) + 1, float("nan"), (math.nan,) * 3,
                                       False, tuple(p_init), math.nan))
            if restarts >= 1:
                return AcsSolution("no_solution", None, None, None, None, math.nan,
                                   len(trace.rows), restarts), trace
            restarts += 1
            assoc0 = max_sinr_association(scenario, p_init)
            forced_beta = SlicingRatios.uniform(r_max_hz)


def _acs_loop(scenario, qos, config, assoc, p, r_max_hz, trace, forced_beta) -> AcsSolution:
    beta = alloc = None
    powers = PowerAndSinr.from_powers(scenario, p)
    u_prev = 0.0
    du_prev = None
    t = 0
    for t in range(1, config.max_iters + 1):
        beta_d = forced_beta if (forced_beta is not None and t == 1) else solve_p1(
            scenario, assoc, powers, r_max_hz, config.p1_tol, config.p1_max_iter)
        beta_d, alloc_d = _guarded_allocation(scenario, qos, beta, beta_d, assoc, powers)
        assoc_d = solve_p2_association(scenario, beta_d, alloc_d, powers, qos, assoc)
        # vehicles that just switched hold no spectrum yet; the power block must see them
        alloc_d = solve_p2_allocation(scenario, beta_d, assoc_d, powers, qos)
        p_prev = powers.p_ap
        powers = solve_p3(scenario, beta_d, assoc_d, alloc_d, qos, powers,
                          max_rounds=config.p3_rounds, tol_w=config.p3_tol_w).powers
        theta = config.theta1 if du_prev is None or du_prev > config.kappa2 else config.theta2
        if beta is None:
            # nothing to feed back yet: adopt the first outputs as they are
            theta = 1.0
            beta, alloc, assoc = beta_d, alloc_d, assoc_d
        else:
            beta = SlicingRatios.from_array(
                beta.as_array() + theta * (beta_d.as_array() - beta.as_array()), r_max_hz)
            alloc = alloc.blend(alloc_d, theta)
            xa = assoc.ap_share(scenario)
            assoc = Association.from_ap_share(
                scenario, xa + theta * (assoc_d.ap_share(scenario) - xa))
            powers = _guarded_powers(scenario, qos, beta, assoc, p_prev, powers.p_ap)
        # U is the block optimum of this round, measured before the feedback mix
        u = throughput_objective(scenario, assoc_d, alloc_d, powers)
        du = abs(u - u_prev) / config.utility_unit
        trace.rows.append(TraceRow(len(trace.rows) + 1, u, tuple(beta.as_array()), True,
                                   tuple(powers.p_ap), theta))
        if du <= config.kappa1:
            return _settle("converged", scenario, qos, beta, assoc, powers, t,
                           (beta_d, assoc_d, alloc_d))
        u_prev, du_prev = u, du
    return _settle("max_iters", scenario, qos, beta, assoc, powers, t, (beta_d, assoc_d, alloc_d))


def _guarded_allocation(scenario, qos, beta, beta_d, assoc, powers, halvings: int = 30):
    """Allocation at the slicing proposal, backtracking toward the incumbent if needed.

    The slicing block ignores the rate floors, so its proposal can starve a station.
    The set of (slicing, association) pairs admitting a floor-meeting allocation is
    convex, so points between the proposal and a feasible incumbent are tried.
    """
    try:
        return beta_d, solve_p2_allocation(scenario, beta_d, assoc, powers, qos)
    except QosInfeasible:
        if beta is None:
            raise
    a, b = beta.as_array(), beta_d.as_array()
    step = 0.5
    for _ in range(halvings):
        cand = SlicingRatios.from_array(a + step * (b - a), beta.r_max_hz)
        try:
            return cand, solve_p2_allocation(scenario, cand, assoc, powers, qos)
        except QosInfeasible:
            step *= 0.5
    return beta, solve_p2_allocation(scenario, beta, assoc, powers, qos)


def _guarded_powers(scenario, qos, beta, assoc, p_prev, p_new, halvings: int = 30):
    """Power step shortened until the damped iterate still meets every floor.

    The power block protects the floors of its own inputs, which are the block
    outputs; the damped iterate carried to the next round needs the same guarantee.
    It holds at the previous powers, so backtracking toward them terminates.
    """
    step = 1.0
    for _ in range(halvings):
        cand = p_prev + step * (p_new - p_prev)
        try:
            solve_p2_allocation(scenario, beta, assoc, cand, qos)
            return PowerAndSinr.from_powers(scenario, cand)
        except QosInfeasible:
            step *= 0.5
    return PowerAndSinr.from_powers(scenario, p_prev)


def _settle(status, scenario, qos, beta, assoc, powers, t, last) -> AcsSolution:
    """Re-solve the allocation at the returned point.

    Budget and QoS rows are bilinear in (X, R), so mixing X and R separately in the
    feedback step leaves them slightly violated. A final allocation solve restores
    them; if the mixed point admits none, the last block outputs are returned.
    """
    try:
        alloc = solve_p2_allocation(scenario, beta, assoc, powers, qos)
    except QosInfeasible:
        beta, assoc, alloc = last
        alloc = solve_p2_allocation(scenario, beta, assoc, powers, qos)
    u = throughput_objective(scenario, assoc, alloc, powers)
    return AcsSolution(status, beta, assoc, alloc, powers, u, t)
