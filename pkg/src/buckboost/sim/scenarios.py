"""Canned runs: single reference steps and the ignition-then-run sequence."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal

from ..control import LoopConfig, TypeIIIController, closed_loop
from ..converter import CircuitParams, Mode, load_resistance, operating_point
from ..errors import ModeAmbiguityError
from ..smallsignal import AveragedState, averaged_steady_state, plant_tf
from .engine import SimConfig, simulate_averaged, simulate_switched
from .metrics import StepMetrics, step_metrics
from .pwm import PwmConfig, band_duty
from .trace import RefProfile, SimTrace

log = logging.getLogger(__name__)

MODELS = ("averaged", "switched", "linear")


def equilibrium_start(params: CircuitParams, pwm: PwmConfig, v_ctrl: float, r_load: float) -> AveragedState:
    """Averaged-model equilibrium reached with the control signal held at ``v_ctrl``."""
    mode, duty = band_duty(pwm, v_ctrl)
    return averaged_steady_state(params, mode, duty, r_load)


def run_model(model, params, k, loop, pwm, sim, ref, **kw) -> SimTrace:
    if model == "switched":
        return simulate_switched(params, k, loop, pwm, sim, ref, **kw)
    if model == "averaged":
        return simulate_averaged(params, k, loop, sim, ref, pwm=pwm, **kw)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


@dataclass
class StepRun:
    trace: SimTrace
    metrics: StepMetrics
    v_from: float
    v_to: float


def nominal_step(
    params: CircuitParams,
    k: TypeIIIController,
    loop: LoopConfig,
    pwm: PwmConfig,
    sim: SimConfig,
    v_target: float,
    model: str = "averaged",
) -> StepRun:
    """Step from the pass-through equilibrium (SW1 closed, SW2 open) to ``v_target``.

    The pass-through state sits at the buck/boost band boundary, so this is
    the natural starting point for a step into either mode. The load is
    the rated lamp power at ``v_target`` throughout.
    """
    r = load_resistance(v_target, params.p_load)
    x0 = equilibrium_start(params, pwm, pwm.v_h1, r)
    if model == "linear":
        trace = simulate_linear(params, k, loop, sim, x0.v_c, v_target)
    else:
        trace = run_model(model, params, k, loop, pwm, sim, RefProfile.constant(v_target),
                          initial=x0, initial_vctrl=pwm.v_h1, r_load=r)
    return StepRun(trace, step_metrics(trace, 0.0), x0.v_c, v_target)


def simulate_linear(
    params: CircuitParams,
    k: TypeIIIController,
    loop: LoopConfig,
    sim: SimConfig,
    v_from: float,
    v_to: float,
    n_points: int = 20001,
) -> SimTrace:
    """Step response of the linearized closed loop around the ``v_to`` operating point.

    No saturation, no mode change: this is what a small-signal design
    predicts, scaled to the full step.
    """
    op = operating_point(params, v_to)
    cl = closed_loop(plant_tf(params, op), k, loop)
    t = np.linspace(0.0, sim.t_end, n_points)
    _, y = signal.step((cl.num.coeffs[::-1], cl.den.coeffs[::-1]), T=t)
    trace = SimTrace.from_output(t, v_from + (v_to - v_from) * y, v_to)
    trace.mode[:] = 0 if op.mode is Mode.BUCK else 1
    return trace


def ignition_profile(v_boost: float, v_buck: float, t_switch: float,
                     v_nominal: float | None = None, t_nominal: float | None = None) -> RefProfile:
    """Boost to the ignition voltage, then drop to the run voltage, optionally return to nominal."""
    pts = [(0.0, v_boost), (t_switch, v_buck)]
    if v_nominal is not None:
        pts.append((t_nominal, v_nominal))
    return RefProfile(pts)


def nominal_reference(params: CircuitParams, deadband: float, v_nominal: float | None = None) -> float:
    """Closest usable reference to ``v_nominal`` (default: the input voltage).

    A reference inside the avoided buck-boost region is moved to the upper
    edge of the dead-band and the substitution logged.
    """
    v = params.v_in if v_nominal is None else v_nominal
    try:
        operating_point(params, v, deadband)
    except ModeAmbiguityError:
        edge = params.v_in * (1.0 + deadband)
        log.warning("nominal reference %.6g V is inside the dead-band; using %.6g V", v, edge)
        return edge
    return v


@dataclass
class IgnitionRun:
    trace: SimTrace
    boost: StepMetrics | None
    buck: StepMetrics | None
    errors: dict


def run_ignition(
    params: CircuitParams,
    k: TypeIIIController,
    loop: LoopConfig,
    pwm: PwmConfig,
    sim: SimConfig,
    v_boost: float,
    v_buck: float,
    t_switch: float,
    model: str = "averaged",
) -> IgnitionRun:
    """Start from rest, regulate to ``v_boost``, then step down to ``v_buck`` at ``t_switch``."""
    ref = ignition_profile(v_boost, v_buck, t_switch)
    trace = run_model(model, params, k, loop, pwm, sim, ref)
    found: dict = {}
    errors: dict = {}
    for name, t0, t1 in (("boost", 0.0, t_switch), ("buck", t_switch, None)):
        try:
            found[name] = step_metrics(trace, t0, t_stop=t1, initial=0.0 if name == "boost" else None)
        except Exception as exc:  # settling undefined is reported per segment
            errors[name] = exc
    return IgnitionRun(trace, found.get("boost"), found.get("buck"), errors)


def settled_deviation(switched: SimTrace, averaged: SimTrace, windows) -> float:
    """Largest |cycle-averaged switched - averaged| output inside ``windows``."""
    ys = switched.cycle_average()
    ya = np.interp(switched.t, averaged.t, averaged.v_o)
    worst = 0.0
    for lo, hi in windows:
        m = (switched.t >= lo) & (switched.t <= hi)
        if np.any(m):
            worst = max(worst, float(np.max(np.abs(ys[m] - ya[m]))))
    return worst
