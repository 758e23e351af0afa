import math

import pytest
from hypothesis import given, strategies as st

from slicenet.qos import TrafficSpec, min_rate_sensitive, min_rate_tolerant, rate_floors


def test_table_defaults_reproduce_published_rates():
    spec = TrafficSpec()
    assert min_rate_sensitive(spec) == pytest.approx(140370.65, abs=0.01)
    assert min_rate_tolerant(spec) == 180000.0


def test_hand_formula_natural_log():
    # recomputed independently from the effective-bandwidth bound
    ls, lam, d, v = 1048.0, 4.0, 0.01, 1e-3
    expect = -ls * math.log(v) / (d * math.log(1 - math.log(v) / (lam * d)))
    assert min_rate_sensitive(TrafficSpec()) == pytest.approx(expect, rel=1e-15)


def test_sensitive_rate_tends_to_mean_arrival_rate_as_violation_prob_goes_to_one():
    # -ln(v) -> 0 cancels between numerator and denominator, leaving L_s * lambda_s
    spec = TrafficSpec(varrho=1 - 1e-9)
    assert min_rate_sensitive(spec) == pytest.approx(spec.L_s * spec.lambda_s, rel=1e-6)


def test_doubling_packet_size_doubles_rate():
    a = min_rate_sensitive(TrafficSpec(L_s=1048))
    assert min_rate_sensitive(TrafficSpec(L_s=2096)) == pytest.approx(2 * a, rel=1e-12)


def test_tolerant_rate_cases():
    assert min_rate_tolerant(TrafficSpec(lambda_n=0.0)) == 0.0
    assert min_rate_tolerant(TrafficSpec(lambda_n=40.0, L_n=9000)) == 360000.0


def test_tolerant_floor_exceeds_sensitive_floor_at_defaults():
    spec = TrafficSpec()
    assert min_rate_tolerant(spec) > min_rate_sensitive(spec)


def test_rate_floors_per_class():
    f = rate_floors([True, False], TrafficSpec())
    assert f[0] == pytest.approx(140370.65, abs=0.01) and f[1] == 180000.0


@pytest.mark.parametrize("kw", [dict(varrho=0.0), dict(varrho=1.0), dict(L_s=0.0), dict(D_max=-1.0)])
def test_invalid_specs_rejected(kw):
    with pytest.raises(ValueError):
        TrafficSpec(**kw)


@given(d=st.floats(1e-3, 1.0), v=st.floats(1e-6, 0.5))
def test_monotone_decreasing_in_delay_bound_and_violation_prob(d, v):
    base = min_rate_sensitive(TrafficSpec(D_max=d, varrho=v))
    assert min_rate_sensitive(TrafficSpec(D_max=d * 1.01, varrho=v)) < base
    assert min_rate_sensitive(TrafficSpec(D_max=d, varrho=min(v * 1.01, 0.99))) < base
