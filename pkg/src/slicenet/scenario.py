"""Static network snapshot: road, base stations, vehicles, gains and SINR."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np


class ScenarioError(ValueError):
    pass


class StationKind(str, Enum):
    ENB = "ENB"
    WIFI_AP = "WIFI_AP"


class TrafficClass(str, Enum):
    DELAY_SENSITIVE = "DELAY_SENSITIVE"
    DELAY_TOLERANT = "DELAY_TOLERANT"


class Slice(str, Enum):
    OTHER_ENB_SLICE = "OTHER_ENB_SLICE"
    WIFI_SLICE = "WIFI_SLICE"


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def ap_radius_for_power(power_w: float) -> float:
    """Coverage radius of an AP; 200 m at 1 W, 260 m at 2.5 W, linear in between."""
    return 200.0 + (power_w - 1.0) * (60.0 / 1.5)


@dataclass(frozen=True)
class RoadConfig:
    length_m: float = 1200.0
    lanes: int = 2
    lane_width_m: float = 3.5
    min_headway_m: float = 5.0
    av_density_per_m: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if self.min_headway_m <= 0:
            raise ScenarioError("min_headway_m must be positive")
        if self.av_density_per_m < 0:
            raise ScenarioError("density must be non-negative")
        if self.av_density_per_m * self.min_headway_m > 1.0 + 1e-12:
            raise ScenarioError(
                f"density {self.av_density_per_m}/m infeasible with "
                f"{self.min_headway_m} m headway")

    @property
    def vehicles_per_lane(self) -> int:
        return int(round(self.av_density_per_m * self.length_m))


@dataclass(frozen=True)
class BaseStation:
    id: str
    kind: StationKind
    position: tuple[float, float]
    tx_power_w: float
    coverage_radius_m: float
    group: int | None = None        # 1 or 2, eNBs only
    parent_enb: str | None = None   # APs only


@dataclass(frozen=True)
class Vehicle:
    id: str
    position: tuple[float, float]
    traffic_class: TrafficClass


@dataclass(frozen=True)
class ChannelModel:
    enb_intercept_db: float = -30.0
    ap_intercept_db: float = -40.0
    slope_db: float = 35.0
    noise_dbm: float = -104.0

    @property
    def noise_power_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    def pathloss_db(self, kind: StationKind, d: np.ndarray | float):
        d = np.maximum(np.asarray(d, dtype=float), 1.0)
        icpt = self.enb_intercept_db if kind == StationKind.ENB else self.ap_intercept_db
        return icpt - self.slope_db * np.log10(d)


@dataclass(frozen=True)
class Deployment:
    """Station layout along the road. Coordinates are fractions of road length."""
    enb_x: tuple[float, ...] = (0.25, 0.75)
    enb_groups: tuple[int, ...] = (1, 2)
    enb_offset_m: float = -10.0
    enb_power_w: float = 10.0
    enb_radius_m: float = 600.0
    ap_x: tuple[float, ...] = (0.125, 0.375, 0.625, 0.875)
    ap_parent: tuple[int, ...] = (0, 0, 1, 1)
    ap_offset_m: float = -5.0
    ap_power_w: float = 1.0
    p_max_w: float = 2.5


def channel_gain(model: ChannelModel, station: BaseStation, vehicle: Vehicle) -> float:
    d = math.dist(station.position, vehicle.position)
    return float(10.0 ** (model.pathloss_db(station.kind, d) / 10.0))


def _place_lane(rng: np.random.Generator, n: int, length: float, headway: float) -> np.ndarray:
    # Uniform over configurations with gaps >= headway: sorted uniforms on the
    # shrunken segment, then re-insert the mandatory gaps.
    if n == 0:
        return np.empty(0)
    free = length - (n - 1) * headway
    if free < -1e-9:
        raise ScenarioError("lane cannot hold the requested vehicles")
    u = np.sort(rng.uniform(0.0, max(free, 0.0), size=n))
    return u + headway * np.arange(n)


@dataclass(frozen=True, eq=False)
class Scenario:
    road: RoadConfig
    stations: tuple[BaseStation, ...]
    vehicles: tuple[Vehicle, ...]
    channel: ChannelModel = field(default_factory=ChannelModel)
    p_sensitive: float = 0.8
    p_max_w: float = 2.5

    def __post_init__(self):
        enb = [s for s in self.stations if s.kind == StationKind.ENB]
        ap = [s for s in self.stations if s.kind == StationKind.WIFI_AP]
        object.__setattr__(self, "enbs", tuple(enb))
        object.__setattr__(self, "aps", tuple(ap))
        enb_index = {s.id: j for j, s in enumerate(enb)}
        for s in ap:
            if s.parent_enb not in enb_index:
                raise ScenarioError(f"AP {s.id} has unknown parent {s.parent_enb}")
            par = enb[enb_index[s.parent_enb]]
            if math.dist(s.position, par.position) + s.coverage_radius_m > par.coverage_radius_m + 1e-9:
                raise ScenarioError(f"AP {s.id} coverage not inside eNB {par.id}")
        pos_v = np.array([v.position for v in self.vehicles], dtype=float).reshape(-1, 2)
        g_enb = np.empty((len(enb), len(pos_v)))
        g_ap = np.empty((len(ap), len(pos_v)))
        d_enb = np.empty_like(g_enb)
        d_ap = np.empty_like(g_ap)
        for j, s in enumerate(enb):
            d_enb[j] = np.hypot(*(pos_v - s.position).T)
            g_enb[j] = 10.0 ** (self.channel.pathloss_db(s.kind, d_enb[j]) / 10.0)
        for i, s in enumerate(ap):
            d_ap[i] = np.hypot(*(pos_v - s.position).T)
            g_ap[i] = 10.0 ** (self.channel.pathloss_db(s.kind, d_ap[i]) / 10.0)
        for a in (g_enb, g_ap, d_enb, d_ap):
            a.setflags(write=False)

        # each vehicle: nearest covering AP (if any); its eNB is that AP's parent,
        # otherwise the nearest covering eNB
        ap_parent = np.array([enb_index[s.parent_enb] for s in ap], dtype=int)
        ap_r = np.array([s.coverage_radius_m for s in ap]).reshape(-1, 1)
        enb_r = np.array([s.coverage_radius_m for s in enb]).reshape(-1, 1)
        n = len(pos_v)
        ap_of = np.full(n, -1, dtype=int)
        enb_of = np.full(n, -1, dtype=int)
        if len(ap):
            d_cov = np.where(d_ap <= ap_r, d_ap, np.inf)
            has = np.isfinite(d_cov).any(axis=0)
            ap_of[has] = np.argmin(d_cov[:, has], axis=0)
            enb_of[has] = ap_parent[ap_of[has]]
        rest = enb_of < 0
        if len(enb) and rest.any():
            d_cov = np.where(d_enb <= enb_r, d_enb, np.inf)[:, rest]
            ok = np.isfinite(d_cov).any(axis=0)
            if not ok.all():
                raise ScenarioError("vehicle outside every eNB coverage")
            enb_of[rest] = np.argmin(d_cov, axis=0)
        sensitive = np.array([v.traffic_class == TrafficClass.DELAY_SENSITIVE
                              for v in self.vehicles], dtype=bool)
        for a in (ap_of, enb_of, sensitive, ap_parent):
            a.setflags(write=False)
        object.__setattr__(self, "g_enb", g_enb)
        object.__setattr__(self, "g_ap", g_ap)
        object.__setattr__(self, "dist_enb", d_enb)
        object.__setattr__(self, "dist_ap", d_ap)
        object.__setattr__(self, "ap_of", ap_of)
        object.__setattr__(self, "enb_of", enb_of)
        object.__setattr__(self, "ap_parent", ap_parent)
        object.__setattr__(self, "sensitive", sensitive)
        object.__setattr__(self, "enb_group", np.array([s.group for s in enb], dtype=int))
        object.__setattr__(self, "enb_power", np.array([s.tx_power_w for s in enb]))

    # sizes and sets -------------------------------------------------------
    @property
    def n_vehicles(self) -> int:
        return len(self.vehicles)

    @property
    def n_enb(self) -> int:
        return len(self.enbs)

    @property
    def n_ap(self) -> int:
        return len(self.aps)

    @property
    def gains(self) -> np.ndarray:
        """Station x vehicle linear gains, eNBs first then APs."""
        return np.vstack([self.g_enb, self.g_ap])

    @property
    def in_ap(self) -> np.ndarray:
        return self.ap_of >= 0

    @property
    def ap_group(self) -> np.ndarray:
        """Group of each AP's parent eNB."""
        return self.enb_group[self.ap_parent]

    def per_vehicle_ap(self, values, fill: float = 0.0) -> np.ndarray:
        """Map a per-AP array onto vehicles via their covering AP; ``fill`` elsewhere."""
        out = np.full(self.n_vehicles, fill, dtype=float)
        cov = self.in_ap
        out[cov] = np.asarray(values, dtype=float)[self.ap_of[cov]]
        return out

    def covered_by_enb(self, j: int) -> np.ndarray:
        """Indices of vehicles in M_j."""
        return np.flatnonzero(self.enb_of == j)

    def enb_only(self, j: int) -> np.ndarray:
        """Vehicles of eNB j outside every AP (the M-bar set)."""
        return np.flatnonzero((self.enb_of == j) & ~self.in_ap)

    def covered_by_ap(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.ap_of == i)

    @property
    def default_ap_power(self) -> np.ndarray:
        return np.array([s.tx_power_w for s in self.aps])

    @property
    def noise_w(self) -> float:
        return self.channel.noise_power_w

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "road": asdict(self.road),
            "channel": asdict(self.channel),
            "p_sensitive": self.p_sensitive,
            "p_max_w": self.p_max_w,
            "stations": [
                {**asdict(s), "kind": s.kind.value, "position": list(s.position)}
                for s in self.stations
            ],
            "vehicles": [
                {"id": v.id, "position": list(v.position), "traffic_class": v.traffic_class.value}
                for v in self.vehicles
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        stations = tuple(
            BaseStation(**{**s, "kind": StationKind(s["kind"]), "position": tuple(s["position"])})
            for s in d["stations"])
        vehicles = tuple(
            Vehicle(v["id"], tuple(v["position"]), TrafficClass(v["traffic_class"]))
            for v in d["vehicles"])
        return cls(road=RoadConfig(**d["road"]), stations=stations, vehicles=vehicles,
                   channel=ChannelModel(**d.get("channel", {})),
                   p_sensitive=d.get("p_sensitive", 0.8), p_max_w=d.get("p_max_w", 2.5))

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    def with_ap_power(self, power_w: float) -> "Scenario":
        """Same vehicles, APs re-deployed at a fixed power (radius follows power)."""
        stations = tuple(
            s if s.kind == StationKind.ENB else
            BaseStation(s.id, s.kind, s.position, power_w, ap_radius_for_power(power_w),
                        parent_enb=s.parent_enb)
            for s in self.stations)
        return Scenario(self.road, stations, self.vehicles, self.channel,
                        self.p_sensitive, self.p_max_w)


def default_stations(road: RoadConfig, deployment: Deployment | None = None) -> tuple[BaseStation, ...]:
    dep = deployment or Deployment()
    out = []
    for j, (fx, grp) in enumerate(zip(dep.enb_x, dep.enb_groups)):
        out.append(BaseStation(f"S{j + 1}", StationKind.ENB, (fx * road.length_m, dep.enb_offset_m),
                               dep.enb_power_w, dep.enb_radius_m, group=grp))
    for i, (fx, par) in enumerate(zip(dep.ap_x, dep.ap_parent)):
        out.append(BaseStation(f"W{i + 1}", StationKind.WIFI_AP, (fx * road.length_m, dep.ap_offset_m),
                               dep.ap_power_w, ap_radius_for_power(dep.ap_power_w),
                               parent_enb=f"S{par + 1}"))
    return tuple(out)


def build_scenario(road: RoadConfig, deployment: Deployment | Sequence[BaseStation] | None = None,
                   p: float = 0.8, seed: int | None = None,
                   channel: ChannelModel | None = None) -> Scenario:
    """Draw vehicles on the road and assemble an immutable scenario.

    Vehicles are spread uniformly per lane subject to the minimum headway;
    each one is delay-sensitive with probability ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise ScenarioError("p must lie in [0, 1]")
    seed = road.rng_seed if seed is None else seed
    if deployment is None or isinstance(deployment, Deployment):
        stations = default_stations(road, deployment)
        p_max = (deployment or Deployment()).p_max_w
    else:
        stations = tuple(deployment)
        p_max = Deployment().p_max_w
    rng = np.random.default_rng(seed)
    vehicles = []
    n = road.vehicles_per_lane
    for lane in range(road.lanes):
        xs = _place_lane(rng, n, road.length_m, road.min_headway_m)
        ys = (lane + 0.5) * road.lane_width_m
        cls = rng.random(n) < p
        for x, s in zip(xs, cls):
            vehicles.append(Vehicle(
                f"V{len(vehicles)}", (float(x), float(ys)),
                TrafficClass.DELAY_SENSITIVE if s else TrafficClass.DELAY_TOLERANT))
    return Scenario(road, stations, tuple(vehicles), channel or ChannelModel(),
                    p_sensitive=p, p_max_w=p_max)


# ---------------------------------------------------------------------------
# SINR

def _ap_power(scenario: Scenario, powers) -> np.ndarray:
    p = scenario.default_ap_power if powers is None else np.asarray(powers, dtype=float)
    if p.shape != (scenario.n_ap,):
        raise ValueError(f"expected {scenario.n_ap} AP powers, got shape {p.shape}")
    return p


def enb_interference(scenario: Scenario, j: int, powers) -> np.ndarray:
    """Interference (W) at every vehicle on eNB j's slice, excluding noise."""
    p_ap = _ap_power(scenario, powers)
    grp = scenario.enb_group[j]
    same = (scenario.enb_group == grp)
    same[j] = False
    other_aps = scenario.ap_group != grp
    return (scenario.enb_power[same] @ scenario.g_enb[same]
            + p_ap[other_aps] @ scenario.g_ap[other_aps])


def ap_interference(scenario: Scenario, i: int, powers, slc: Slice) -> np.ndarray:
    p_ap = _ap_power(scenario, powers)
    grp = scenario.ap_group[i]
    if slc == Slice.WIFI_SLICE:
        mask = np.ones(scenario.n_ap, dtype=bool)
        mask[i] = False
        return p_ap[mask] @ scenario.g_ap[mask]
    mask = scenario.ap_group == grp
    mask[i] = False
    enb_mask = scenario.enb_group != grp
    return (p_ap[mask] @ scenario.g_ap[mask]
            + scenario.enb_power[enb_mask] @ scenario.g_enb[enb_mask])


def sinr_enb(scenario: Scenario, enb: int, vehicle: int, powers=None) -> float:
    sig = scenario.enb_power[enb] * scenario.g_enb[enb, vehicle]
    return float(sig / (enb_interference(scenario, enb, powers)[vehicle] + scenario.noise_w))


def sinr_ap(scenario: Scenario, ap: int, vehicle: int, powers=None,
            slc: Slice = Slice.WIFI_SLICE) -> float:
    p_ap = _ap_power(scenario, powers)
    sig = p_ap[ap] * scenario.g_ap[ap, vehicle]
    return float(sig / (ap_interference(scenario, ap, powers, slc)[vehicle] + scenario.noise_w))


@dataclass(frozen=True)
class LinkSinr:
    """Per-vehicle SINRs towards the vehicle's candidate stations.

    ``enb`` is toward the covering eNB; ``other``/``wifi`` toward the covering AP
    on the reused eNB slice and on the Wi-Fi slice (zero where no AP covers).
    """
    enb: np.ndarray
    other: np.ndarray
    wifi: np.ndarray

    def efficiency(self):
        return np.log2(1 + self.enb), np.log2(1 + self.other), np.log2(1 + self.wifi)


def link_sinr(scenario: Scenario, powers=None) -> LinkSinr:
    """Vectorized SINRs for every vehicle and its candidate serving stations."""
    p_ap = _ap_power(scenario, powers)
    n = scenario.n_vehicles
    k = np.arange(n)
    enb = np.zeros(n)
    for j in range(scenario.n_enb):
        idx = k[scenario.enb_of == j]
        sig = scenario.enb_power[j] * scenario.g_enb[j, idx]
        enb[idx] = sig / (enb_interference(scenario, j, p_ap)[idx] + scenario.noise_w)
    other = np.zeros(n)
    wifi = np.zeros(n)
    for i in range(scenario.n_ap):
        idx = k[scenario.ap_of == i]
        sig = p_ap[i] * scenario.g_ap[i, idx]
        other[idx] = sig / (ap_interference(scenario, i, p_ap, Slice.OTHER_ENB_SLICE)[idx] + scenario.noise_w)
        wifi[idx] = sig / (ap_interference(scenario, i, p_ap, Slice.WIFI_SLICE)[idx] + scenario.noise_w)
    return LinkSinr(enb, other, wifi)
