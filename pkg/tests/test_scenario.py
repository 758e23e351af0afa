import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import small_scenario
from slicenet.scenario import (BaseStation, ChannelModel, Deployment, RoadConfig, Scenario,
                               ScenarioError, Slice, StationKind, TrafficClass, Vehicle,
                               ap_radius_for_power, build_scenario, channel_gain, link_sinr,
                               sinr_ap, sinr_enb)

NOISE_W = 10 ** (-13.4)


def test_vehicle_count_default_road():
    sc = build_scenario(RoadConfig(av_density_per_m=0.05, lanes=2, length_m=1200), seed=3)
    assert sc.n_vehicles == 120


def test_p_zero_gives_only_tolerant():
    sc = build_scenario(RoadConfig(), p=0.0, seed=1)
    assert all(v.traffic_class == TrafficClass.DELAY_TOLERANT for v in sc.vehicles)


def test_same_seed_same_scenario_bytes():
    a = build_scenario(RoadConfig(rng_seed=7), p=0.8)
    b = build_scenario(RoadConfig(rng_seed=7), p=0.8)
    assert a.to_json() == b.to_json()
    assert build_scenario(RoadConfig(rng_seed=8)).to_json() != a.to_json()


def test_json_round_trip():
    sc = build_scenario(RoadConfig(rng_seed=2), p=0.3)
    back = Scenario.from_json(sc.to_json())
    assert back.to_json() == sc.to_json()
    np.testing.assert_array_equal(back.g_ap, sc.g_ap)
    np.testing.assert_array_equal(back.ap_of, sc.ap_of)


@pytest.mark.parametrize("density", [0.04, 0.1, 0.2])
def test_headway_and_bounds(density):
    road = RoadConfig(av_density_per_m=density, rng_seed=4)
    sc = build_scenario(road)
    xy = np.array([v.position for v in sc.vehicles])
    for y in np.unique(xy[:, 1]):
        x = np.sort(xy[xy[:, 1] == y, 0])
        assert x.min() >= 0 and x.max() <= road.length_m
        assert np.all(np.diff(x) >= road.min_headway_m - 1e-9)


def test_infeasible_density_rejected():
    with pytest.raises(ScenarioError):
        RoadConfig(av_density_per_m=0.3, min_headway_m=5.0)


def test_ap_outside_parent_rejected():
    enb = BaseStation("S1", StationKind.ENB, (0.0, 0.0), 10.0, 100.0, group=1)
    ap = BaseStation("W1", StationKind.WIFI_AP, (50.0, 0.0), 1.0, 200.0, parent_enb="S1")
    with pytest.raises(ScenarioError):
        Scenario(RoadConfig(), (enb, ap), ())


def test_ap_discs_nest_in_parent_discs_default_layout():
    sc = build_scenario(RoadConfig(), seed=0).with_ap_power(2.5)
    for s in sc.aps:
        par = next(e for e in sc.enbs if e.id == s.parent_enb)
        assert math.dist(s.position, par.position) + s.coverage_radius_m <= par.coverage_radius_m


def test_radius_follows_power():
    assert ap_radius_for_power(1.0) == pytest.approx(200.0)
    assert ap_radius_for_power(2.5) == pytest.approx(260.0)


@pytest.mark.parametrize("kind,d,expect", [
    (StationKind.ENB, 1.0, 1e-3), (StationKind.WIFI_AP, 1.0, 1e-4),
    (StationKind.ENB, 100.0, 1e-10), (StationKind.ENB, 0.2, 1e-3)])
def test_channel_gain_values(kind, d, expect):
    st_ = BaseStation("X", kind, (0.0, 0.0), 1.0, 1000.0, group=1)
    v = Vehicle("V", (d, 0.0), TrafficClass.DELAY_SENSITIVE)
    assert channel_gain(ChannelModel(), st_, v) == pytest.approx(expect, rel=1e-12)


@given(d1=st.floats(1.0, 2000.0), dd=st.floats(1e-3, 500.0))
def test_gain_decreases_with_distance(d1, dd):
    cm = ChannelModel()
    for kind in StationKind:
        assert cm.pathloss_db(kind, d1 + dd) < cm.pathloss_db(kind, d1)


def _single_enb_scenario():
    enb = BaseStation("S1", StationKind.ENB, (0.0, 0.0), 10.0, 600.0, group=1)
    v = Vehicle("V0", (100.0, 0.0), TrafficClass.DELAY_SENSITIVE)
    return Scenario(RoadConfig(), (enb,), (v,))


def test_single_enb_sinr_hand_value():
    # 10 W * 1e-10 / 10^-13.4 W
    sc = _single_enb_scenario()
    assert sc.noise_w == pytest.approx(NOISE_W, rel=1e-12)
    s = sinr_enb(sc, 0, 0)
    assert s == pytest.approx(10 * 1e-10 / NOISE_W, rel=1e-12)
    assert s == pytest.approx(2.512e4, rel=1e-3)
    assert math.log2(1 + s) == pytest.approx(14.62, abs=5e-3)


def test_sinr_vanishes_with_serving_power():
    enb = BaseStation("S1", StationKind.ENB, (0.0, 0.0), 1e-30, 600.0, group=1)
    v = Vehicle("V0", (100.0, 0.0), TrafficClass.DELAY_SENSITIVE)
    assert sinr_enb(Scenario(RoadConfig(), (enb,), (v,)), 0, 0) < 1e-20


def test_single_ap_wifi_slice_is_snr():
    enb = BaseStation("S1", StationKind.ENB, (0.0, 0.0), 10.0, 600.0, group=1)
    ap = BaseStation("W1", StationKind.WIFI_AP, (100.0, 0.0), 1.0, 200.0, parent_enb="S1")
    v = Vehicle("V0", (150.0, 0.0), TrafficClass.DELAY_SENSITIVE)
    sc = Scenario(RoadConfig(), (enb, ap), (v,))
    g = 10 ** ((-40 - 35 * math.log10(50.0)) / 10)
    assert sinr_ap(sc, 0, 0, slc=Slice.WIFI_SLICE) == pytest.approx(g / NOISE_W, rel=1e-12)


def test_default_layout_has_no_enb_on_enb_interference():
    sc = build_scenario(RoadConfig(rng_seed=1))
    powers = np.full(sc.n_ap, 1e-30)       # silence APs: only eNB-to-eNB terms could remain
    s = link_sinr(sc, powers)
    j = sc.enb_of
    snr = sc.enb_power[j] * sc.g_enb[j, np.arange(sc.n_vehicles)] / sc.noise_w
    np.testing.assert_allclose(s.enb, snr, rtol=1e-9)


def test_other_slice_interferers_are_opposite_enb_and_sibling_ap():
    sc = build_scenario(RoadConfig(rng_seed=1))
    k = int(np.flatnonzero(sc.ap_of == 0)[0])          # AP 1 sits under eNB 1 with AP 2
    p = np.array([1.0, 1.3, 1.7, 2.1])
    sig = p[0] * sc.g_ap[0, k]
    interf = sc.enb_power[1] * sc.g_enb[1, k] + p[1] * sc.g_ap[1, k]
    assert sinr_ap(sc, 0, k, p, Slice.OTHER_ENB_SLICE) == pytest.approx(
        sig / (interf + sc.noise_w), rel=1e-12)
    wifi_interf = sum(p[i] * sc.g_ap[i, k] for i in (1, 2, 3))
    assert sinr_ap(sc, 0, k, p, Slice.WIFI_SLICE) == pytest.approx(
        sig / (wifi_interf + sc.noise_w), rel=1e-12)


def test_mirrored_vehicles_equal_sinr():
    road = RoadConfig(lanes=1)
    xs = [100.0, 400.0, 530.0]
    vs = [Vehicle(f"V{i}", (x, 1.75), TrafficClass.DELAY_SENSITIVE) for i, x in enumerate(xs)]
    vs += [Vehicle(f"M{i}", (road.length_m - x, 1.75), TrafficClass.DELAY_SENSITIVE)
           for i, x in enumerate(xs)]
    sc = Scenario(road, build_scenario(road).stations, tuple(vs))
    s = link_sinr(sc, np.ones(4))
    for a in range(3):
        assert s.enb[a] == pytest.approx(s.enb[a + 3], rel=1e-12)
        assert s.wifi[a] == pytest.approx(s.wifi[a + 3], rel=1e-12)
        assert s.other[a] == pytest.approx(s.other[a + 3], rel=1e-12)


def test_coverage_partition_counts_each_vehicle_once():
    sc = build_scenario(RoadConfig(rng_seed=5))
    n_ap = sum(int((sc.ap_of == i).sum()) for i in range(sc.n_ap))
    n_bar = sum(int(sc.enb_only(j).sum()) for j in range(sc.n_enb))
    assert n_ap + n_bar == sc.n_vehicles
    for k in range(sc.n_vehicles):
        i = sc.ap_of[k]
        if i >= 0:
            assert sc.dist_ap[i, k] <= sc.aps[i].coverage_radius_m
        assert sc.dist_enb[sc.enb_of[k], k] <= sc.enbs[sc.enb_of[k]].coverage_radius_m


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), which=st.integers(0, 3), bump=st.floats(0.01, 0.5))
def test_sinr_monotone_in_powers(seed, which, bump):
    sc = small_scenario(12, seed)
    p = np.random.default_rng(seed).uniform(0.5, 2.0, sc.n_ap)
    q = p.copy()
    q[which] += bump
    a, b = link_sinr(sc, p), link_sinr(sc, q)
    served = sc.ap_of == which
    other = sc.in_ap & ~served
    # serving AP up: its vehicles gain on both slices
    assert np.all(b.wifi[served] > a.wifi[served])
    assert np.all(b.other[served] > a.other[served])
    # every other AP's vehicles lose on the Wi-Fi slice
    assert np.all(b.wifi[other] < a.wifi[other])
    # eNB users of the opposite group lose
    hit = sc.enb_group[sc.enb_of] != sc.ap_group[which]
    assert np.all(b.enb[hit] < a.enb[hit])
    assert np.all(b.enb[~hit] == a.enb[~hit])
