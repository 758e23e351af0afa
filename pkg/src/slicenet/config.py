"""Run configuration: a flat JSON object whose keys override the defaults below."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .qos import TrafficSpec
from .scenario import ChannelModel, Deployment, RoadConfig, ScenarioError
from .solvers import AcsConfig

SCHEMES = ("proposed", "max_sinr", "max_utility")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # road and traffic mix
    density: float = 0.05
    p_sensitive: float = 0.8
    road_length_m: float = 1200.0
    lanes: int = 2
    lane_width_m: float = 3.5
    min_headway_m: float = 5.0
    seed: int = 0
    # spectrum and radio
    w_v_mhz: float = 20.0
    p_max_w: float = 2.5
    ap_init_power_w: float = 1.0
    baseline_ap_power_w: float = 1.0
    noise_dbm: float = -104.0
    # QoS
    sensitive_packet_bits: float = 1048.0
    sensitive_rate_pps: float = 4.0
    delay_bound_s: float = 0.01
    violation_prob: float = 1e-3
    tolerant_packet_bits: float = 9000.0
    tolerant_rate_pps: float = 20.0
    # feedback and stopping
    theta1: float = 0.001
    theta2: float = 0.1
    kappa1: float = 0.01
    kappa2: float = 20.0
    max_iters: int = 100
    # experiments
    seeds: int = 5
    schemes: tuple[str, ...] = field(default=SCHEMES)

    def __post_init__(self):
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme(s): {bad}")
        if self.w_v_mhz <= 0:
            raise ConfigError("w_v_mhz must be positive")
        if not 0.0 <= self.p_sensitive <= 1.0:
            raise ConfigError("p_sensitive must lie in [0, 1]")
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if not 0.0 < self.ap_init_power_w <= self.p_max_w:
            raise ConfigError("ap_init_power_w must lie in (0, p_max_w]")
        if not 0.0 < self.baseline_ap_power_w <= self.p_max_w:
            raise ConfigError("baseline_ap_power_w must lie in (0, p_max_w]")
        # let the component types run their own checks
        try:
            self.road()
            self.traffic()
            self.acs()
        except (ValueError, ScenarioError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def r_max_hz(self) -> float:
        return self.w_v_mhz * 1e6

    def road(self, seed: int | None = None) -> RoadConfig:
        return RoadConfig(self.road_length_m, self.lanes, self.lane_width_m, self.min_headway_m,
                          self.density, self.seed if seed is None else seed)

    def deployment(self) -> Deployment:
        return Deployment(ap_power_w=self.ap_init_power_w, p_max_w=self.p_max_w)

    def channel(self) -> ChannelModel:
        return ChannelModel(noise_dbm=self.noise_dbm)

    def traffic(self) -> TrafficSpec:
        return TrafficSpec(self.sensitive_packet_bits, self.sensitive_rate_pps, self.delay_bound_s,
                           self.violation_prob, self.tolerant_packet_bits, self.tolerant_rate_pps)

    def acs(self) -> AcsConfig:
        return AcsConfig(kappa1=self.kappa1, kappa2=self.kappa2, theta1=self.theta1,
                         theta2=self.theta2, max_iters=self.max_iters)

    def with_value(self, key: str, value) -> "RunConfig":
        return from_dict({**self.to_dict(), key: value})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schemes"] = list(self.schemes)
        return d


def from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name: f for f in fields(RunConfig)}
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key(s): {unknown}")
    kw = {}
    base = RunConfig()
    for k, v in d.items():
        default = getattr(base, k)
        if k == "schemes":
            if isinstance(v, str) or not isinstance(v, (list, tuple)):
                raise ConfigError("schemes must be a list")
            kw[k] = tuple(v)
        elif isinstance(default, bool) or isinstance(v, bool):
            raise ConfigError(f"{k}: booleans are not accepted")
        elif isinstance(default, int):
            if not isinstance(v, int):
                raise ConfigError(f"{k} must be an integer")
            kw[k] = v
        else:
            if not isinstance(v, (int, float)):
                raise ConfigError(f"{k} must be a number")
            kw[k] = float(v)
    return replace(base, **kw)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return from_dict(data)
