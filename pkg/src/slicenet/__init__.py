"""Joint spectrum slicing, association, allocation and AP power control for a
two-tier cellular/Wi-Fi vehicular network."""
from .qos import TrafficSpec, min_rate_sensitive, min_rate_tolerant
from .scenario import RoadConfig, Scenario, build_scenario
from .solvers import AcsConfig, run_acs

__all__ = ["AcsConfig", "RoadConfig", "Scenario", "TrafficSpec", "build_scenario",
           "min_rate_sensitive", "min_rate_tolerant", "run_acs"]
__version__ = "0.1.0"
