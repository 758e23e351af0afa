"""Decision variables, objectives, closed forms and constraint residuals."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qos import TrafficSpec, rate_floors
from .scenario import LinkSinr, Scenario, link_sinr

X_EPS = 1e-6          # association weights at or below this count as "not associated"
FEAS_TOL = 1e-6


@dataclass(frozen=True)
class SlicingRatios:
    beta1: float
    beta2: float
    beta_w: float
    r_max_hz: float = 20e6

    def __post_init__(self):
        b = self.as_array()
        if (b < -1e-9).any() or (b > 1 + 1e-9).any() or abs(b.sum() - 1.0) > 1e-6:
            raise ValueError(f"slicing ratios off the simplex: {b}")

    def as_array(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2, self.beta_w])

    @classmethod
    def from_array(cls, b, r_max_hz: float) -> "SlicingRatios":
        b = np.clip(np.asarray(b, dtype=float), 0.0, None)
        b = b / b.sum()
        return cls(float(b[0]), float(b[1]), float(b[2]), r_max_hz)

    @classmethod
    def uniform(cls, r_max_hz: float) -> "SlicingRatios":
        return cls(1 / 3, 1 / 3, 1 / 3, r_max_hz)

    def group_budget(self, group: int) -> float:
        """Hz owned by the eNBs of ``group`` (1 or 2)."""
        return (self.beta1 if group == 1 else self.beta2) * self.r_max_hz

    @property
    def wifi_budget(self) -> float:
        return self.beta_w * self.r_max_hz


@dataclass(frozen=True)
class Association:
    x_enb: np.ndarray   # vehicles x eNBs
    x_ap: np.ndarray    # vehicles x APs

    @classmethod
    def from_ap_share(cls, scenario: Scenario, share) -> "Association":
        """Build from each vehicle's weight on its covering AP."""
        share = np.where(scenario.in_ap, np.clip(np.asarray(share, dtype=float), 0, 1), 0.0)
        k = np.arange(scenario.n_vehicles)
        x_enb = np.zeros((scenario.n_vehicles, scenario.n_enb))
        x_ap = np.zeros((scenario.n_vehicles, scenario.n_ap))
        x_enb[k, scenario.enb_of] = 1.0 - share
        cov = scenario.in_ap
        x_ap[k[cov], scenario.ap_of[cov]] = share[cov]
        return cls(x_enb, x_ap)

    def ap_share(self, scenario: Scenario) -> np.ndarray:
        k = np.arange(scenario.n_vehicles)
        out = np.zeros(scenario.n_vehicles)
        cov = scenario.in_ap
        out[cov] = self.x_ap[k[cov], scenario.ap_of[cov]]
        return out

    def enb_share(self, scenario: Scenario) -> np.ndarray:
        return self.x_enb[np.arange(scenario.n_vehicles), scenario.enb_of]

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.x_enb == 0) | (self.x_enb == 1))
                    and np.all((self.x_ap == 0) | (self.x_ap == 1)))


@dataclass(frozen=True)
class Allocation:
    r_enb: np.ndarray       # Hz, vehicles x eNBs
    r_ap_other: np.ndarray  # Hz from the opposite eNB group's slice, vehicles x APs
    r_ap_wifi: np.ndarray   # Hz from the Wi-Fi slice, vehicles x APs

    @classmethod
    def from_vectors(cls, scenario: Scenario, re, ro, rw) -> "Allocation":
        k = np.arange(scenario.n_vehicles)
        cov = scenario.in_ap
        r_enb = np.zeros((scenario.n_vehicles, scenario.n_enb))
        r_enb[k, scenario.enb_of] = re
        r_o = np.zeros((scenario.n_vehicles, scenario.n_ap))
        r_w = np.zeros_like(r_o)
        r_o[k[cov], scenario.ap_of[cov]] = np.asarray(ro)[cov]
        r_w[k[cov], scenario.ap_of[cov]] = np.asarray(rw)[cov]
        return cls(r_enb, r_o, r_w)

    def vectors(self, scenario: Scenario):
        """Per-vehicle (eNB, AP-other, AP-wifi) spectrum toward its candidate stations."""
        k = np.arange(scenario.n_vehicles)
        cov = scenario.in_ap
        re = self.r_enb[k, scenario.enb_of]
        ro = np.zeros(scenario.n_vehicles)
        rw = np.zeros(scenario.n_vehicles)
        ro[cov] = self.r_ap_other[k[cov], scenario.ap_of[cov]]
        rw[cov] = self.r_ap_wifi[k[cov], scenario.ap_of[cov]]
        return re, ro, rw

    def blend(self, other: "Allocation", theta: float) -> "Allocation":
        return Allocation(*(a + theta * (b - a) for a, b in (
            (self.r_enb, other.r_enb), (self.r_ap_other, other.r_ap_other),
            (self.r_ap_wifi, other.r_ap_wifi))))


@dataclass(frozen=True)
class PowerAndSinr:
    p_ap: np.ndarray
    c_enb: np.ndarray
    c_ap_other: np.ndarray
    c_ap_wifi: np.ndarray

    @classmethod
    def from_powers(cls, scenario: Scenario, p_ap) -> "PowerAndSinr":
        p = np.asarray(p_ap, dtype=float)
        s = link_sinr(scenario, p)
        return cls(p, s.enb, s.other, s.wifi)

    def as_links(self) -> LinkSinr:
        return LinkSinr(self.c_enb, self.c_ap_other, self.c_ap_wifi)


@dataclass(frozen=True)
class EffectiveLoads:
    n_prime: np.ndarray   # per AP
    m_resid: np.ndarray   # per eNB


def effective_loads(scenario: Scenario, assoc: Association) -> EffectiveLoads:
    xa = assoc.ap_share(scenario)
    n_prime = np.bincount(scenario.ap_of[scenario.in_ap], weights=xa[scenario.in_ap],
                          minlength=scenario.n_ap).astype(float)
    m_resid = np.bincount(scenario.enb_of, weights=1.0 - xa, minlength=scenario.n_enb).astype(float)
    return EffectiveLoads(n_prime, m_resid)


def _links(scenario: Scenario, powers) -> LinkSinr:
    if isinstance(powers, PowerAndSinr):
        return link_sinr(scenario, powers.p_ap)
    if isinstance(powers, LinkSinr):
        return powers
    return link_sinr(scenario, powers)


def link_rates(scenario: Scenario, alloc: Allocation, powers) -> tuple[np.ndarray, np.ndarray]:
    """Unweighted rate of each vehicle at its eNB and at its AP (bit/s)."""
    e_enb, e_o, e_w = _links(scenario, powers).efficiency()
    re, ro, rw = alloc.vectors(scenario)
    return re * e_enb, ro * e_o + rw * e_w


def vehicle_rates(scenario: Scenario, assoc: Association, alloc: Allocation, powers) -> np.ndarray:
    g_enb, g_ap = link_rates(scenario, alloc, powers)
    xa = assoc.ap_share(scenario)
    return (1.0 - xa) * g_enb + xa * g_ap


def rate_of_vehicle(scenario: Scenario, assoc: Association, alloc: Allocation, powers,
                    vehicle: int) -> float:
    return float(vehicle_rates(scenario, assoc, alloc, powers)[vehicle])


def throughput_objective(scenario: Scenario, assoc: Association, alloc: Allocation, powers) -> float:
    """Association-weighted network throughput in bit/s."""
    return float(vehicle_rates(scenario, assoc, alloc, powers).sum())


def p3_objective(scenario: Scenario, assoc: Association, alloc: Allocation,
                 sinr_aux: PowerAndSinr | LinkSinr) -> float:
    """Throughput with auxiliary SINR variables in place of the true SINRs."""
    links = sinr_aux.as_links() if isinstance(sinr_aux, PowerAndSinr) else sinr_aux
    return throughput_objective(scenario, assoc, alloc, links)


# ---------------------------------------------------------------------------
# slicing-level log utility with equal allocation folded in

@dataclass(frozen=True)
class P1Terms:
    """Per-vehicle weights and affine coefficients of the log-utility.

    Each term contributes ``w * log(coef @ beta * r_max / load)``.
    """
    weight: np.ndarray
    coef: np.ndarray      # n x 3
    load: np.ndarray


def p1_terms(scenario: Scenario, assoc: Association, powers) -> P1Terms:
    e_enb, e_o, e_w = _links(scenario, powers).efficiency()
    xa = assoc.ap_share(scenario)
    loads = effective_loads(scenario, assoc)
    n = scenario.n_vehicles
    grp_v = scenario.enb_group[scenario.enb_of]
    c_enb = np.zeros((n, 3))
    c_enb[np.arange(n), grp_v - 1] = e_enb
    cov = scenario.in_ap
    c_ap = np.zeros((n, 3))
    ap_grp = scenario.per_vehicle_ap(scenario.ap_group, 1).astype(int)
    other = 2 - ap_grp   # index of the opposite group's slice: group 1 -> beta2 (idx 1)
    c_ap[np.arange(n), other] = e_o
    c_ap[:, 2] = e_w
    w = np.concatenate([1.0 - xa, np.where(cov, xa, 0.0)])
    coef = np.vstack([c_enb, c_ap])
    load = np.concatenate([loads.m_resid[scenario.enb_of],
                           scenario.per_vehicle_ap(loads.n_prime, 1.0)])
    keep = w > 0
    return P1Terms(w[keep], coef[keep], load[keep])


def utility_from_terms(terms: P1Terms, beta: np.ndarray, r_max_hz: float) -> float:
    lin = terms.coef @ beta
    if np.any(lin <= 0) or np.any(terms.load <= 0):
        return -np.inf
    return float(terms.weight @ np.log(lin * r_max_hz / terms.load))


def utility_gradient(terms: P1Terms, beta: np.ndarray) -> np.ndarray:
    lin = terms.coef @ beta
    return (terms.weight / lin) @ terms.coef


def utility_p1(scenario: Scenario, slicing: SlicingRatios, assoc: Association, powers) -> float:
    """Aggregate log-utility under equal per-station allocation; -inf if undefined."""
    return utility_from_terms(p1_terms(scenario, assoc, powers), slicing.as_array(), slicing.r_max_hz)


def equal_allocation(scenario: Scenario, slicing: SlicingRatios, assoc: Association) -> Allocation:
    loads = effective_loads(scenario, assoc)
    xa = assoc.ap_share(scenario)
    with np.errstate(divide="ignore", invalid="ignore"):
        per_enb = np.array([slicing.group_budget(g) for g in scenario.enb_group]) / loads.m_resid
        per_enb[~np.isfinite(per_enb)] = 0.0
        other_budget = np.array([slicing.group_budget(3 - g) for g in scenario.ap_group])
        per_o = other_budget / loads.n_prime
        per_w = slicing.wifi_budget / loads.n_prime
        per_o[~np.isfinite(per_o)] = 0.0
        per_w[~np.isfinite(per_w)] = 0.0
    re = np.where(1.0 - xa > 0, per_enb[scenario.enb_of], 0.0)
    on_ap = scenario.in_ap & (xa > 0)
    ro = np.where(on_ap, scenario.per_vehicle_ap(per_o), 0.0)
    rw = np.where(on_ap, scenario.per_vehicle_ap(per_w), 0.0)
    return Allocation.from_vectors(scenario, re, ro, rw)


# ---------------------------------------------------------------------------
# constraint residuals

@dataclass
class ResidualReport:
    """Signed, normalized residuals per constraint family; >= -tol means satisfied."""
    families: dict[str, np.ndarray] = field(default_factory=dict)

    def worst(self) -> dict[str, float]:
        return {k: (float(v.min()) if v.size else 0.0) for k, v in self.families.items()}

    def feasible(self, tol: float = FEAS_TOL) -> bool:
        return all(v >= -tol for v in self.worst().values())

    def violated(self, tol: float = FEAS_TOL) -> list[str]:
        return [k for k, v in self.worst().items() if v < -tol]


def budget_usage(scenario: Scenario, assoc: Association, alloc: Allocation):
    """Hz used per eNB, per AP other-slice and per AP Wi-Fi slice."""
    xa = assoc.ap_share(scenario)
    re, ro, rw = alloc.vectors(scenario)
    cov = scenario.in_ap
    used_enb = np.bincount(scenario.enb_of, weights=(1 - xa) * re, minlength=scenario.n_enb)
    used_o = np.bincount(scenario.ap_of[cov], weights=(xa * ro)[cov], minlength=scenario.n_ap)
    used_w = np.bincount(scenario.ap_of[cov], weights=(xa * rw)[cov], minlength=scenario.n_ap)
    return used_enb, used_o, used_w


def constraint_residuals(scenario: Scenario, slicing: SlicingRatios, assoc: Association,
                         alloc: Allocation, powers, qos: TrafficSpec) -> ResidualReport:
    rep = ResidualReport()
    b = slicing.as_array()
    rep.families["slicing_box"] = np.minimum(b, 1 - b)
    rep.families["slicing_sum"] = np.array([-abs(b.sum() - 1.0)])

    loads = effective_loads(scenario, assoc)
    used_enb, used_o, used_w = budget_usage(scenario, assoc, alloc)
    budget_enb = np.array([slicing.group_budget(g) for g in scenario.enb_group])
    budget_o = np.array([slicing.group_budget(3 - g) for g in scenario.ap_group])
    budget_w = np.full(scenario.n_ap, slicing.wifi_budget)
    scale = slicing.r_max_hz

    def budget_res(used, budget, load):
        # equality for stations carrying load; idle stations may leave spectrum unused
        return np.where(load > X_EPS, -np.abs(used - budget), budget - used) / scale

    rep.families["budget_enb"] = budget_res(used_enb, budget_enb, loads.m_resid)
    rep.families["budget_ap_other"] = budget_res(used_o, budget_o, loads.n_prime)
    rep.families["budget_ap_wifi"] = budget_res(used_w, budget_w, loads.n_prime)
    re, ro, rw = alloc.vectors(scenario)
    rep.families["nonneg"] = np.concatenate([re, ro, rw]) / scale
    xe, xa = assoc.enb_share(scenario), assoc.ap_share(scenario)
    rep.families["assoc_box"] = np.concatenate([
        np.minimum(assoc.x_enb, 1 - assoc.x_enb).ravel(),
        np.minimum(assoc.x_ap, 1 - assoc.x_ap).ravel()])
    cov = scenario.in_ap
    rep.families["assoc_coupling"] = -np.abs(xe + xa - 1.0)[cov]

    if isinstance(powers, PowerAndSinr):
        true = link_sinr(scenario, powers.p_ap)
        p = powers.p_ap
        aux = powers.as_links()
        g_enb, g_ap = link_rates(scenario, alloc, aux)
        rep.families["power_box"] = np.minimum(p, scenario.p_max_w - p) / scenario.p_max_w
        served_e = xe > X_EPS
        served_a = (xa > X_EPS) & cov
        rep.families["sinr_aux"] = np.concatenate([
            ((true.enb - aux.enb) / np.maximum(true.enb, 1.0))[served_e],
            ((true.other - aux.other) / np.maximum(true.other, 1.0))[served_a],
            ((true.wifi - aux.wifi) / np.maximum(true.wifi, 1.0))[served_a]])
    else:
        g_enb, g_ap = link_rates(scenario, alloc, powers)
    floor = rate_floors(scenario.sensitive, qos)
    res_enb = xe * (g_enb - floor) / floor
    res_ap = np.where(cov, xa * (g_ap - floor) / floor, 0.0)
    sens = scenario.sensitive
    rep.families["qos_sensitive"] = np.concatenate([res_enb[sens], res_ap[sens & cov]])
    rep.families["qos_tolerant"] = np.concatenate([res_enb[~sens], res_ap[~sens & cov]])
    return rep


def solution_to_dict(scenario: Scenario, slicing: SlicingRatios, assoc: Association,
                     alloc: Allocation, powers) -> dict:
    p = powers.p_ap if isinstance(powers, PowerAndSinr) else np.asarray(powers, dtype=float)
    re, ro, rw = alloc.vectors(scenario)
    return {
        "slicing": {"beta1": slicing.beta1, "beta2": slicing.beta2,
                    "beta_w": slicing.beta_w, "r_max_hz": slicing.r_max_hz},
        "ap_power_w": p.tolist(),
        "ap_share": assoc.ap_share(scenario).tolist(),
        "r_enb_hz": re.tolist(), "r_ap_other_hz": ro.tolist(), "r_ap_wifi_hz": rw.tolist(),
        "vehicle_rate_bps": vehicle_rates(scenario, assoc, alloc, p).tolist(),
        "throughput_bps": throughput_objective(scenario, assoc, alloc, p),
    }
