import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from slicenet.model import Association
from slicenet.scenario import RoadConfig, build_scenario


def small_scenario(n: int, seed: int, p: float = 0.5, lanes: int = 1):
    """n vehicles per lane on the default 1200 m layout."""
    return build_scenario(RoadConfig(av_density_per_m=n / 1200.0, lanes=lanes, rng_seed=seed), p=p)


def random_association(scenario, rng, binary=False, max_per_ap=None):
    share = rng.random(scenario.n_vehicles)
    if binary:
        share = (share > 0.5).astype(float)
    share = np.where(scenario.in_ap, share, 0.0)
    if max_per_ap is not None:
        for i in range(scenario.n_ap):
            idx = np.flatnonzero((scenario.ap_of == i) & (share > 0))
            share[idx[max_per_ap:]] = 0.0
    return Association.from_ap_share(scenario, share)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "CRITERIA", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
