import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buckboost import CircuitParams, Conduction, Mode, ccm_check, inductor_ripple, load_resistance, operating_point
from buckboost.converter import OperatingPoint
from buckboost.errors import DomainError, ModeAmbiguityError

P = CircuitParams()


@pytest.mark.parametrize("v,p,r", [(400, 18, 8888.888888), (280, 18, 4355.555555), (1, 1, 1)])
def test_load_resistance(v, p, r):
    assert load_resistance(v, p) == pytest.approx(r, rel=1e-9)


def test_load_resistance_rejects_nonpositive():
    with pytest.raises(DomainError):
        load_resistance(0, 18)


def test_boost_operating_point():
    op = operating_point(P, 400)
    assert op.mode is Mode.BOOST
    assert op.duty == pytest.approx(0.225, abs=1e-12)


def test_buck_operating_point():
    op = operating_point(P, 280)
    assert op.mode is Mode.BUCK
    assert op.duty == pytest.approx(0.90323, abs=1e-5)


def test_deadband_rejected():
    with pytest.raises(ModeAmbiguityError):
        operating_point(P, 310)
    with pytest.raises(ModeAmbiguityError):
        operating_point(P, 312)
    # configurable width
    assert operating_point(P, 312, deadband=0.001).mode is Mode.BOOST


@pytest.mark.parametrize("kw", [dict(l=0), dict(c=-1e-6), dict(f_sw=500), dict(v_in=math.nan)])
def test_params_validated(kw):
    with pytest.raises(DomainError):
        CircuitParams(**kw)


def test_ripple_hand_values():
    assert inductor_ripple(P, operating_point(P, 400)) == pytest.approx(0.11625, rel=1e-9)
    assert inductor_ripple(P, operating_point(P, 280)) == pytest.approx(0.04516, rel=1e-3)


def test_ripple_vanishes_with_duty():
    op = OperatingPoint(Mode.BOOST, 310.0, 1e-12, 5000.0, 0.06, 0.06)
    assert inductor_ripple(P, op) < 1e-9


def test_ccm_classification_at_nominal_points():
    buck = ccm_check(P, operating_point(P, 280))
    assert buck.conduction is Conduction.CCM
    assert buck.margin == pytest.approx(0.06429 - 0.02258, abs=1e-4)
    boost = ccm_check(P, operating_point(P, 400))
    assert boost.conduction is Conduction.BOUNDARY
    assert abs(boost.margin) < 1e-3


def test_deep_ccm_margin():
    params = CircuitParams(v_in=100, l=1.0, f_sw=1e4)
    # ripple = (100 - 50)/1 * 0.5/1e4 = 2.5 mA; pick a heavy load
    op = OperatingPoint(Mode.BUCK, 50.0, 0.5, 5.0, 10.0, 10.0)
    res = ccm_check(params, op)
    assert res.conduction is Conduction.CCM
    assert res.margin == pytest.approx(10.0 - inductor_ripple(params, op) / 2)


def test_heavier_load_raises_both_margins():
    heavy = CircuitParams(p_load=36)
    for v in (400, 280):
        assert ccm_check(heavy, operating_point(heavy, v)).margin > ccm_check(P, operating_point(P, v)).margin


duty = st.floats(min_value=0.01, max_value=0.95)


@given(duty)
def test_boost_duty_round_trip(d):
    assert operating_point(P, P.v_in / (1 - d)).duty == pytest.approx(d, abs=1e-12)


@given(st.floats(min_value=0.05, max_value=0.985))
def test_buck_duty_round_trip(d):
    assert operating_point(P, P.v_in * d).duty == pytest.approx(d, abs=1e-12)


@given(duty)
def test_boost_current_balance(d):
    op = operating_point(P, P.v_in / (1 - d))
    assert op.i_l_avg * (1 - op.duty) == pytest.approx(op.i_out, rel=1e-14)


@given(duty, duty)
def test_boost_ripple_monotone_in_duty(d1, d2):
    lo, hi = sorted((d1, d2))
    r_lo = inductor_ripple(P, operating_point(P, P.v_in / (1 - lo)))
    r_hi = inductor_ripple(P, operating_point(P, P.v_in / (1 - hi)))
    assert r_lo <= r_hi


@settings(max_examples=30)
@given(st.sampled_from([400.0, 280.0, 350.0, 200.0]))
def test_ccm_flips_to_dcm_as_load_drops(v):
    order = {Conduction.DCM: 0, Conduction.BOUNDARY: 1, Conduction.CCM: 2}
    seen = []
    for p in (0.5, 1, 2, 4, 8, 12, 18, 24, 36, 72, 144):
        params = CircuitParams(p_load=p)
        seen.append(order[ccm_check(params, operating_point(params, v)).conduction])
    assert seen == sorted(seen)
    assert seen[0] == 0 and seen[-1] == 2
