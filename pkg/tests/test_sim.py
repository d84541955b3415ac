import logging
import math

import numpy as np
import pytest
from scipy import signal
from hypothesis import given, settings
from hypothesis import strategies as st

from buckboost import CircuitParams, LoopConfig, Mode, PerformanceGoals, TypeIIIController, operating_point
from buckboost.control import goal_gate, type_iii_tf
from buckboost.errors import DomainError, SettlingUndefinedError
from buckboost.sim import (
    CSV_HEADER,
    PwmConfig,
    RefProfile,
    SimConfig,
    SimTrace,
    band_duty,
    controller_realization,
    pwm_states,
    simulate_averaged,
    simulate_switched,
    step_metrics,
    vctrl_for_duty,
)
from buckboost.sim.scenarios import equilibrium_start, nominal_reference, nominal_step, run_ignition
from buckboost.sim.trace import read_csv
from buckboost.sim.engine import lead_transition, switch_segments
from buckboost.smallsignal import plant_tf, stage_derivatives, stage_kernel

P = CircuitParams()
K = TypeIIIController()
CFG = LoopConfig()
PWM = PwmConfig()


def _duties_over_period(v_ctrl, n=2000):
    t = (np.arange(n) + 0.5) / n * PWM.period
    states = [pwm_states(PWM, v_ctrl, x).switches for x in t]
    return np.mean([s.sw1 for s in states]), np.mean([s.sw2 for s in states])


# -- pwm ---------------------------------------------------------------------

def test_pwm_buck_band():
    d1, d2 = _duties_over_period(0.5)
    assert d1 == pytest.approx(0.5, abs=1e-3) and d2 == 0.0


def test_pwm_boost_band():
    d1, d2 = _duties_over_period(1.225)
    assert d1 == 1.0 and d2 == pytest.approx(0.225, abs=1e-3)


def test_pwm_band_boundary_is_pass_through():
    assert band_duty(PWM, 1.0) == (Mode.BUCK, 1.0)
    assert _duties_over_period(1.0) == (1.0, 0.0)


@given(st.floats(-1, 3))
def test_pwm_never_modulates_both_switches(v):
    d1, d2 = _duties_over_period(v, n=200)
    assert d1 in (0.0, 1.0) or d2 in (0.0, 1.0)


@given(st.floats(0, 2))
def test_pwm_average_duty_matches_band(v):
    n = 500
    mode, duty = band_duty(PWM, v)
    d1, d2 = _duties_over_period(v, n=n)
    got = d1 if mode is Mode.BUCK else d2
    assert abs(got - duty) <= 1.0 / n + 1e-12


def test_vctrl_for_duty_inverts_band():
    for mode, d in ((Mode.BUCK, 0.3), (Mode.BOOST, 0.225)):
        assert band_duty(PWM, vctrl_for_duty(PWM, mode, d)) == (mode, pytest.approx(d))


def test_pwm_config_validation():
    with pytest.raises(DomainError):
        PwmConfig(v_l1=1.0, v_h1=1.0)


# -- configuration guards ----------------------------------------------------

def test_sim_config_guards():
    with pytest.raises(DomainError):
        SimConfig(t_end=5 * PWM.period).check(PWM.f_sw)
    with pytest.raises(DomainError):
        SimConfig(dt=PWM.period / 50).check(PWM.f_sw)
    SimConfig(dt=PWM.period / 100).check(PWM.f_sw)


# -- controller realization ------------------------------------------------------

@given(st.floats(1, 1e6))
def test_realization_matches_transfer_function(f):
    rz = controller_realization(K)
    s = 2j * math.pi * f
    lead = (rz.p1 * s + rz.p0) / (s * s + rz.w1 * s + rz.w0)
    assert rz.ki / s + lead == pytest.approx(complex(type_iii_tf(K)(s)), rel=1e-9)


@settings(max_examples=30)
@given(st.floats(1e-8, 2e-5), st.floats(-5, 5), st.floats(-5, 5))
def test_lead_transition_matches_lsim(h, e0, e1):
    rz = controller_realization(K)
    phi, g0, g1 = lead_transition(rz, h)
    a = np.array([[0.0, 1.0], [-rz.w0, -rz.w1]])
    sys = signal.StateSpace(a, [[0.0], [1.0]], np.eye(2), np.zeros((2, 1)))
    tt = np.linspace(0.0, h, 2001)
    z0 = np.array([1e-6, -2e-3])
    _, _, x = signal.lsim(sys, e0 + (e1 - e0) * tt / h, tt, X0=z0, interp=True)
    exact = np.array(phi) @ z0 + np.array(g0) * e0 + np.array(g1) * (e1 - e0)
    assert exact == pytest.approx(x[-1], rel=1e-6, abs=1e-12 + 1e-9 * np.max(np.abs(x)))


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.0, 500.0),
       st.floats(0.0, 1e-3), st.booleans())
def test_stage_kernel_matches_reference(s1, s2, i_l, v_c, g, clamp):
    ref = stage_derivatives(P, s1, s2, i_l, v_c, g, diode_clamp=clamp)
    di, dv, cl = stage_kernel(P, clamp)(s1, s2, i_l, v_c, g)
    assert (di, dv, cl) == pytest.approx((ref[0], ref[1], ref[3]), rel=1e-12, abs=1e-9)


@given(st.floats(0.0, 1e-3), st.floats(0.01, 0.99), st.integers(1, 40))
def test_switch_segments_cover_step_with_exact_on_time(t0, duty, periods):
    dt = periods * PWM.period
    segs = switch_segments(t0, dt, duty, PWM.f_sw)
    assert sum(h for h, _ in segs) == pytest.approx(dt, rel=1e-12)
    assert sum(h for h, on in segs if on) == pytest.approx(duty * dt, rel=1e-9)


# -- traces ------------------------------------------------------------------

def test_zero_trace():
    tr = simulate_switched(P, K, CFG, PWM, SimConfig(t_end=10 * PWM.period), RefProfile.constant(0.0),
                           fixed_vctrl=0.0)
    for col in (tr.v_o, tr.i_l, tr.v_c):
        assert np.all(col == 0.0)
    assert not tr.dcm_entered


def test_csv_format(tmp_path):
    tr = simulate_switched(P, K, CFG, PWM, SimConfig(t_end=10 * PWM.period), RefProfile.constant(400.0))
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    raw = path.read_bytes()
    assert raw.startswith((CSV_HEADER + "\n").encode())
    assert b"\r" not in raw
    back = read_csv(path)
    assert np.array_equal(back["v_o"], tr.v_o)
    assert np.array_equal(back["t"], tr.t)
    assert set(back["mode"]) <= {"buck", "boost"}
    assert tr.to_csv() == raw.decode()


def test_ref_profile():
    ref = RefProfile([(1e-3, 280.0), (0.0, 400.0)])
    assert ref(0.0) == 400.0 and ref(0.999e-3) == 400.0 and ref(1e-3) == 280.0
    assert ref.change_times() == [1e-3]


# -- metrics -----------------------------------------------------------------

def test_metrics_flat_trace():
    t = np.linspace(0, 1e-3, 101)
    m = step_metrics(SimTrace.from_output(t, np.full_like(t, 400.0), 400.0))
    assert (m.overshoot, m.steady_state_error, m.settling_time) == (0.0, 0.0, 0.0)


def test_metrics_second_order_overshoot():
    zeta = 0.5
    t = np.linspace(0, 40, 200001)
    wd = math.sqrt(1 - zeta**2)
    y = 1 - np.exp(-zeta * t) * (np.cos(wd * t) + zeta / wd * np.sin(wd * t))
    m = step_metrics(SimTrace.from_output(t, y, 1.0))
    assert m.overshoot == pytest.approx(math.exp(-math.pi * zeta / wd), abs=0.002)


def test_metrics_first_order_rise():
    t = np.linspace(0, 20, 200001)
    m = step_metrics(SimTrace.from_output(t, 1 - np.exp(-t), 1.0))
    assert m.rise_time == pytest.approx(math.log(9), rel=0.01)
    # 2 % band entry of a first-order lag
    assert m.settling_time == pytest.approx(math.log(50), rel=1e-3)


def test_metrics_window_stops_at_next_reference_change():
    t = np.linspace(0, 2, 2001)
    ref = np.where(t < 1, 1.0, 0.5)
    y = np.where(t < 1, 1 - np.exp(-t / 0.05), 0.5)
    tr = SimTrace.from_output(t, y, ref)
    m = step_metrics(tr, 0.0)
    assert m.rise_time == pytest.approx(0.05 * math.log(9), rel=0.02)
    assert step_metrics(tr, 1.0).overshoot == 0.0


def test_settling_undefined():
    t = np.linspace(0, 1, 101)
    with pytest.raises(SettlingUndefinedError):
        step_metrics(SimTrace.from_output(t, t * 0.5, 1.0))


# -- power stage ---------------------------------------------------------------

@pytest.fixture(scope="module")
def boost_open_loop():
    op = operating_point(P, 400.0)
    u = vctrl_for_duty(PWM, op.mode, op.duty)
    x0 = equilibrium_start(P, PWM, u, op.r_load)
    runs = {}
    for n in (500, 1000):
        runs[n] = simulate_switched(P, K, CFG, PWM, SimConfig(dt=PWM.period / n, t_end=1e-3),
                                    RefProfile.constant(400.0), initial=x0, fixed_vctrl=u, r_load=op.r_load)
    return op, runs


def test_step_size_convergence(boost_open_loop):
    _, runs = boost_open_loop
    coarse, fine = runs[500], runs[1000]
    a = coarse.cycle_average()
    b = fine.cycle_average()[::2]
    assert np.allclose(coarse.t, fine.t[::2], rtol=0, atol=1e-15)
    assert np.max(np.abs(a - b) / np.abs(b)) < 1e-3


@pytest.mark.parametrize("mode,duty", [(Mode.BOOST, 0.225), (Mode.BUCK, 0.9)])
def test_energy_balance(mode, duty):
    # T/800 puts both pulse edges on the sample grid, so the sums below are exact per step
    r_load = 6000.0
    u = vctrl_for_duty(PWM, mode, duty)
    x0 = equilibrium_start(P, PWM, u, r_load)
    tr = simulate_switched(P, K, CFG, PWM, SimConfig(dt=PWM.period / 800, t_end=1e-3), RefProfile.constant(300.0),
                           initial=x0, fixed_vctrl=u, r_load=r_load)
    n, dt = tr.samples_per_period, tr.dt
    for first in (0, 13, 27):
        a, b = first * n, (first + 10) * n
        i_mid = 0.5 * (tr.i_l[a:b] + tr.i_l[a + 1:b + 1])
        e_in = np.sum(P.v_in * tr.sw1[a:b] * i_mid) * dt
        # output at both ends of each step, with that step's switch state
        open_frac = 1 - tr.sw2[a:b]
        v_end = (tr.v_c[a + 1:b + 1] + P.r_c * open_frac * tr.i_l[a + 1:b + 1]) / (1 + P.r_c / r_load)
        v_mid = 0.5 * (tr.v_o[a:b] + v_end)
        e_load = np.sum(v_mid**2) / r_load * dt
        stored = 0.5 * P.l * (tr.i_l[b] ** 2 - tr.i_l[a] ** 2) + 0.5 * P.c * (tr.v_c[b] ** 2 - tr.v_c[a] ** 2)
        lost = e_in - e_load - stored
        assert lost >= 0.0
        # and the loss is what the series resistances dissipate
        i_c = open_frac * i_mid - v_mid / r_load
        expected = np.sum(P.r_l * i_mid**2 + P.r_c * i_c**2) * dt
        assert lost == pytest.approx(expected, rel=0.05)


def test_stage_derivatives_diode_clamp():
    # freewheeling with no current left: the diode blocks
    di, _, _, clamped = stage_derivatives(P, 0.0, 0.0, 0.0, 300.0, 1 / 5000, diode_clamp=True)
    assert di == 0.0 and clamped
    di, _, _, clamped = stage_derivatives(P, 1.0, 1.0, 0.0, 300.0, 1 / 5000, diode_clamp=True)
    assert di > 0 and not clamped


def test_averaged_small_signal_response():
    op = operating_point(P, 400.0)
    u0 = vctrl_for_duty(PWM, op.mode, op.duty)
    x0 = equilibrium_start(P, PWM, u0, op.r_load)
    f, amp, t_end = 500.0, 0.01, 40e-3
    w = 2 * math.pi * f
    tr = simulate_averaged(P, K, CFG, SimConfig(t_end=t_end), RefProfile.constant(400.0), pwm=PWM,
                           initial=x0, fixed_vctrl=lambda t: u0 + amp * math.sin(w * t), r_load=op.r_load)
    m = tr.t >= t_end - 20e-3
    t = tr.t[m]
    basis = np.column_stack([np.sin(w * t), np.cos(w * t), np.ones_like(t)])
    c, *_ = np.linalg.lstsq(basis, tr.v_o[m], rcond=None)
    measured = complex(c[0], c[1]) / amp
    expected = plant_tf(P, op).eval_jw(w)
    assert abs(measured) == pytest.approx(abs(expected), rel=0.02)
    assert abs(math.degrees(np.angle(measured / expected))) < 2.0


def test_constant_reference_at_equilibrium_is_flat():
    op = operating_point(P, 400.0)
    u0 = vctrl_for_duty(PWM, op.mode, op.duty)
    x0 = equilibrium_start(P, PWM, u0, op.r_load)
    v_o = stage_derivatives(P, 1.0, op.duty, x0.i_l, x0.v_c, 1 / op.r_load)[2]
    tr = simulate_averaged(P, K, CFG, SimConfig(t_end=2e-3), RefProfile.constant(v_o), pwm=PWM,
                           initial=x0, initial_vctrl=u0, r_load=op.r_load)
    assert np.max(np.abs(tr.v_o - v_o)) < 1e-6 * v_o
    assert not tr.dcm_entered


def test_averaged_boost_step_tracks():
    run = nominal_step(P, K, CFG, PWM, SimConfig(t_end=4e-3), 400.0, "averaged")
    assert run.v_from == pytest.approx(310.0, rel=1e-3)
    assert run.metrics.steady_state_error < 1e-3
    assert np.all(np.isfinite(run.trace.v_o))


def test_linear_model_step():
    m = nominal_step(P, K, CFG, PWM, SimConfig(t_end=4e-3), 400.0, "linear").metrics
    assert m.rise_time == pytest.approx(47.4e-6, rel=0.01)
    assert m.overshoot == pytest.approx(0.128, abs=0.002)
    assert goal_gate(m).passed


@pytest.mark.parametrize("v", [400.0, 280.0], ids=["boost", "buck"])
def test_averaged_step_meets_performance_goals(v):
    run = nominal_step(P, K, CFG, PWM, SimConfig(t_end=4e-3), v, "averaged")
    gate = goal_gate(run.metrics, PerformanceGoals())
    assert gate.passed, f"{run.metrics} -> {gate.checks}"


# -- scenario -------------------------------------------------------------------

def test_nominal_reference_uses_deadband_edge(caplog):
    with caplog.at_level(logging.WARNING):
        v = nominal_reference(P, 0.01)
    assert v == pytest.approx(313.1)
    assert "dead-band" in caplog.text
    assert nominal_reference(P, 0.01, 400.0) == 400.0
    assert nominal_step(P, K, CFG, PWM, SimConfig(t_end=1e-3), v, "averaged").v_to == v


def test_ignition_reports_dcm_and_settles():
    run = run_ignition(P, K, CFG, PWM, SimConfig(t_end=16e-3), 400.0, 280.0, 10e-3, "averaged")
    assert not run.errors
    assert run.trace.dcm_entered
    assert run.trace.dcm_first_t is not None and run.trace.dcm_first_t < 10e-3
    assert run.boost.steady_state_error < 1e-3 and run.buck.steady_state_error < 1e-3


def test_simulation_is_deterministic():
    a = nominal_step(P, K, CFG, PWM, SimConfig(t_end=1e-3), 400.0, "switched").trace.to_csv()
    b = nominal_step(P, K, CFG, PWM, SimConfig(t_end=1e-3), 400.0, "switched").trace.to_csv()
    assert a == b
