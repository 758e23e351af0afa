import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_association, small_scenario
from oracles import central_hessian
from slicenet.model import (Allocation, Association, PowerAndSinr, SlicingRatios, budget_usage,
                            constraint_residuals, effective_loads, equal_allocation,
                            p1_terms, p3_objective, rate_of_vehicle, solution_to_dict,
                            throughput_objective, utility_from_terms, utility_p1,
                            vehicle_rates)
from slicenet.qos import TrafficSpec, min_rate_sensitive
from slicenet.scenario import (BaseStation, LinkSinr, RoadConfig, Scenario, StationKind,
                               TrafficClass, Vehicle, build_scenario, default_stations,
                               link_sinr)

SENS = TrafficClass.DELAY_SENSITIVE


def one_enb_one_vehicle():
    enb = BaseStation("S1", StationKind.ENB, (0.0, 0.0), 10.0, 600.0, group=1)
    return Scenario(RoadConfig(), (enb,), (Vehicle("V0", (100.0, 0.0), SENS),))


def crowd_near_ap1(n: int):
    """n vehicles packed inside AP 1's disc on the default layout."""
    road = RoadConfig()
    vs = tuple(Vehicle(f"V{i}", (110.0 + 8 * i, 1.75), SENS) for i in range(n))
    return Scenario(road, default_stations(road), vs)


def test_rate_is_spectrum_times_efficiency():
    sc = one_enb_one_vehicle()
    alloc = Allocation.from_vectors(sc, [0.5e6], [0.0], [0.0])
    assoc = Association.from_ap_share(sc, [0.0])
    r = rate_of_vehicle(sc, assoc, alloc, None, 0)
    assert r == pytest.approx(0.5e6 * math.log2(1 + 10 * 1e-10 / 10 ** -13.4), rel=1e-12)
    assert r == pytest.approx(7.31e6, rel=1e-3)


def test_zero_allocation_zero_rate_and_throughput():
    sc = small_scenario(6, 1)
    assoc = random_association(sc, np.random.default_rng(0))
    z = np.zeros(sc.n_vehicles)
    alloc = Allocation.from_vectors(sc, z, z, z)
    assert throughput_objective(sc, assoc, alloc, None) == 0.0


def test_ap_rate_with_only_wifi_spectrum_is_single_product():
    sc = crowd_near_ap1(1)
    assoc = Association.from_ap_share(sc, [1.0])
    alloc = Allocation.from_vectors(sc, [0.0], [0.0], [2e6])
    _, _, e_w = link_sinr(sc).efficiency()
    assert rate_of_vehicle(sc, assoc, alloc, None, 0) == pytest.approx(2e6 * e_w[0])


def test_equal_allocation_enb_share():
    # beta1 = 0.3 of 10 MHz over M1 = 10 vehicles, 4 of them on the AP -> 3 MHz / 6
    sc = crowd_near_ap1(10)
    share = np.array([1, 1, 1, 1, 0, 0, 0, 0, 0, 0], float)
    assoc = Association.from_ap_share(sc, share)
    alloc = equal_allocation(sc, SlicingRatios(0.3, 0.5, 0.2, 10e6), assoc)
    re, ro, rw = alloc.vectors(sc)
    np.testing.assert_allclose(re[4:], 0.5e6)
    assert np.all(re[:4] == 0)
    # AP 1 belongs to group 1, so its other slice is beta2
    np.testing.assert_allclose(ro[:4], 0.5 * 10e6 / 4)
    np.testing.assert_allclose(rw[:4], 0.2 * 10e6 / 4)


def test_equal_allocation_wifi_share_two_users():
    sc = crowd_near_ap1(2)
    assoc = Association.from_ap_share(sc, [1.0, 1.0])
    alloc = equal_allocation(sc, SlicingRatios(0.4, 0.4, 0.2, 10e6), assoc)
    np.testing.assert_allclose(alloc.vectors(sc)[2], 1e6)


def test_equal_allocation_meets_budgets_exactly():
    sc = small_scenario(20, 3, lanes=2)
    assoc = random_association(sc, np.random.default_rng(3))
    sl = SlicingRatios(0.3, 0.45, 0.25)
    alloc = equal_allocation(sc, sl, assoc)
    rep = constraint_residuals(sc, sl, assoc, alloc, None, TrafficSpec())
    for fam in ("budget_enb", "budget_ap_other", "budget_ap_wifi"):
        assert rep.worst()[fam] >= -1e-12


def test_effective_loads_reduce_to_counts_when_binary():
    sc = small_scenario(15, 4)
    assoc = random_association(sc, np.random.default_rng(4), binary=True)
    loads = effective_loads(sc, assoc)
    xa = assoc.ap_share(sc)
    for i in range(sc.n_ap):
        assert loads.n_prime[i] == int(((sc.ap_of == i) & (xa == 1)).sum())
    for j in range(sc.n_enb):
        assert loads.m_resid[j] == int(((sc.enb_of == j) & (xa == 0)).sum())


def test_single_enb_vehicle_utility_closed_form():
    sc = one_enb_one_vehicle()
    assoc = Association.from_ap_share(sc, [0.0])
    e = math.log2(1 + 10 * 1e-10 / 10 ** -13.4)
    for b1 in (0.2, 0.5, 0.9):
        sl = SlicingRatios(b1, 1 - b1, 0.0, 20e6)
        assert utility_p1(sc, sl, assoc, None) == pytest.approx(math.log(b1 * 20e6 * e))


def test_doubling_rmax_shifts_utility_by_n_log2():
    sc = small_scenario(8, 2)
    assoc = random_association(sc, np.random.default_rng(2), binary=True)
    b = SlicingRatios(0.3, 0.3, 0.4)
    u1 = utility_p1(sc, b, assoc, None)
    u2 = utility_p1(sc, SlicingRatios(0.3, 0.3, 0.4, 40e6), assoc, None)
    assert u2 - u1 == pytest.approx(sc.n_vehicles * math.log(2), rel=1e-9)


def test_utility_is_minus_inf_when_a_loaded_slice_is_empty():
    sc = small_scenario(8, 2)
    assoc = Association.from_ap_share(sc, np.zeros(sc.n_vehicles))
    assert utility_p1(sc, SlicingRatios(1.0, 0.0, 0.0), assoc, None) == -math.inf


def test_qos_residual_zero_at_exact_floor():
    sc = one_enb_one_vehicle()
    e = math.log2(1 + 10 * 1e-10 / 10 ** -13.4)
    r = min_rate_sensitive(TrafficSpec()) / e
    rep = constraint_residuals(sc, SlicingRatios(r / 20e6, 1 - r / 20e6, 0.0),
                               Association.from_ap_share(sc, [0.0]),
                               Allocation.from_vectors(sc, [r], [0.0], [0.0]), None, TrafficSpec())
    assert rep.families["qos_sensitive"][0] == pytest.approx(0.0, abs=1e-12)


def test_qos_residual_vanishes_when_not_associated():
    sc = crowd_near_ap1(1)
    assoc = Association.from_ap_share(sc, [1.0])      # eNB weight is 0
    alloc = Allocation.from_vectors(sc, [0.0], [0.0], [1e6])
    rep = constraint_residuals(sc, SlicingRatios(0.5, 0.45, 0.05), assoc, alloc, None,
                               TrafficSpec())
    assert rep.families["qos_sensitive"][0] == 0.0


def test_residuals_flag_violations():
    sc = small_scenario(6, 1)
    assoc = random_association(sc, np.random.default_rng(1))
    sl = SlicingRatios(0.3, 0.3, 0.4)
    alloc = equal_allocation(sc, sl, assoc)
    bumped = Allocation(alloc.r_enb * 1.1, alloc.r_ap_other, alloc.r_ap_wifi)
    rep = constraint_residuals(sc, sl, assoc, bumped, None, TrafficSpec())
    assert "budget_enb" in rep.violated()
    p = PowerAndSinr.from_powers(sc, np.full(sc.n_ap, 3.0))
    rep = constraint_residuals(sc, sl, assoc, alloc, p, TrafficSpec())
    assert "power_box" in rep.violated()


def test_p3_objective_identities():
    sc = small_scenario(10, 5)
    rng = np.random.default_rng(5)
    assoc = random_association(sc, rng)
    alloc = equal_allocation(sc, SlicingRatios(0.3, 0.3, 0.4), assoc)
    p = rng.uniform(0.5, 2.5, sc.n_ap)
    aux = PowerAndSinr.from_powers(sc, p)
    assert p3_objective(sc, assoc, alloc, aux) == pytest.approx(
        throughput_objective(sc, assoc, alloc, p), rel=1e-12)
    z = np.zeros(sc.n_vehicles)
    assert p3_objective(sc, assoc, alloc, LinkSinr(z, z, z)) == 0.0
    lower = LinkSinr(aux.c_enb * 0.7, aux.c_ap_other * 0.9, aux.c_ap_wifi * 0.5)
    assert p3_objective(sc, assoc, alloc, lower) <= throughput_objective(sc, assoc, alloc, p)


def test_one_vehicle_per_station_throughput_is_sum_of_rates():
    sc = small_scenario(6, 8)
    assoc = random_association(sc, np.random.default_rng(8), binary=True)
    alloc = equal_allocation(sc, SlicingRatios(0.3, 0.3, 0.4), assoc)
    total = sum(rate_of_vehicle(sc, assoc, alloc, None, k) for k in range(sc.n_vehicles))
    assert throughput_objective(sc, assoc, alloc, None) == pytest.approx(total, rel=1e-12)


def test_solution_dict_is_json():
    sc = small_scenario(5, 1)
    assoc = random_association(sc, np.random.default_rng(1))
    sl = SlicingRatios(0.3, 0.3, 0.4)
    d = solution_to_dict(sc, sl, assoc, equal_allocation(sc, sl, assoc), np.ones(sc.n_ap))
    back = json.loads(json.dumps(d))
    assert back["throughput_bps"] == pytest.approx(sum(back["vehicle_rate_bps"]))


@pytest.mark.parametrize("bad", [(0.5, 0.6, 0.0), (-0.1, 0.6, 0.5), (1.2, -0.1, -0.1)])
def test_slicing_off_simplex_rejected(bad):
    with pytest.raises(ValueError):
        SlicingRatios(*bad)


# --- properties ----------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), b=st.tuples(st.floats(0.05, 1), st.floats(0.05, 1),
                                               st.floats(0.05, 1)))
def test_p1_hessian_negative_semidefinite(seed, b):
    sc = small_scenario(8, seed)
    assoc = random_association(sc, np.random.default_rng(seed))
    terms = p1_terms(sc, assoc, None)
    beta = np.array(b) / sum(b)

    def f(y):        # coordinates (beta1, beta2) with beta_w = 1 - beta1 - beta2
        return utility_from_terms(terms, np.array([y[0], y[1], 1 - y[0] - y[1]]), 20e6)

    H = central_hessian(f, beta[:2], 1e-4)
    eig = np.linalg.eigvalsh(H)
    assert eig.max() <= 1e-6 * max(1.0, np.abs(H).max())


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_throughput_affine_in_each_block(seed):
    rng = np.random.default_rng(seed)
    sc = small_scenario(8, seed)
    a1, a2 = random_association(sc, rng), random_association(sc, rng)
    n = sc.n_vehicles
    r1 = Allocation.from_vectors(sc, *(rng.uniform(0, 1e6, n) for _ in range(3)))
    r2 = Allocation.from_vectors(sc, *(rng.uniform(0, 1e6, n) for _ in range(3)))
    mid_r = r1.blend(r2, 0.5)
    f = throughput_objective
    assert f(sc, a1, mid_r, None) == pytest.approx(
        0.5 * (f(sc, a1, r1, None) + f(sc, a1, r2, None)), rel=1e-9)
    mid_a = Association.from_ap_share(sc, 0.5 * (a1.ap_share(sc) + a2.ap_share(sc)))
    assert f(sc, mid_a, r1, None) == pytest.approx(
        0.5 * (f(sc, a1, r1, None) + f(sc, a2, r1, None)), rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), b=st.tuples(st.floats(0, 1), st.floats(0, 1),
                                               st.floats(0.01, 1)))
def test_equal_allocation_spends_each_loaded_budget(seed, b):
    sc = small_scenario(10, seed)
    assoc = random_association(sc, np.random.default_rng(seed))
    sl = SlicingRatios.from_array(b, 20e6)
    used_e, used_o, used_w = budget_usage(sc, assoc, equal_allocation(sc, sl, assoc))
    loads = effective_loads(sc, assoc)
    for j in range(sc.n_enb):
        if loads.m_resid[j] > 1e-9:
            assert used_e[j] == pytest.approx(sl.group_budget(sc.enb_group[j]), rel=1e-6, abs=1e-6)
    for i in range(sc.n_ap):
        if loads.n_prime[i] > 1e-9:
            assert used_o[i] == pytest.approx(sl.group_budget(3 - sc.ap_group[i]), rel=1e-6, abs=1e-6)
            assert used_w[i] == pytest.approx(sl.wifi_budget, rel=1e-6, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_vehicle_rates_nonnegative_and_bounded_by_best_side(seed):
    rng = np.random.default_rng(seed)
    sc = small_scenario(8, seed)
    assoc = random_association(sc, rng)
    alloc = equal_allocation(sc, SlicingRatios(0.3, 0.3, 0.4), assoc)
    from slicenet.model import link_rates
    g_e, g_a = link_rates(sc, alloc, None)
    r = vehicle_rates(sc, assoc, alloc, None)
    assert np.all(r >= 0)
    assert np.all(r <= np.maximum(g_e, g_a) * (1 + 1e-12))
