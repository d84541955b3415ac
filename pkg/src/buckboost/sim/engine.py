"""Fixed-step RK4 simulation of the closed loop, switched or averaged.

Both simulators share one state vector: inductor current, capacitor
voltage and the three controller states. The controller is the Type-III
compensator split into an integrator plus a two-state lead section in
controllable canonical form:

    K(s) = ki/s + (c1 s + c0) / (b1 s^2 + b2 s + b3),   ki = a3/b3

Keeping the integrator separate lets anti-windup freeze exactly that state
while the lead section keeps tracking the error.

The plant is stepped with RK4 while the control signal is held. The
controller sees the resulting error as a ramp across the step and is
advanced exactly (trapezoid for the integrator, matrix exponential for the
lead pair), so its poles near 470 krad/s stay stable even at the coarse
averaged step of T_sw/5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from ..control import LoopConfig, TypeIIIController
from ..converter import CircuitParams, Mode
from ..errors import DivergenceError, DomainError
from ..smallsignal import AveragedState, stage_kernel
from .pwm import PwmConfig, band_duty
from .trace import RefProfile, SimTrace

SWITCHED_STEPS_PER_PERIOD = 500
AVERAGED_STEPS_PER_PERIOD = 5


@dataclass(frozen=True)
class SimConfig:
    """Integration settings. ``None`` step sizes resolve against the switching period."""

    dt: float | None = None
    t_end: float = 4e-3
    averaged_dt: float | None = None
    diode_clamp: bool = True
    anti_windup: bool = True

    def switched_dt(self, f_sw: float) -> float:
        dt = self.dt if self.dt is not None else 1.0 / (f_sw * SWITCHED_STEPS_PER_PERIOD)
        if dt > 1.0 / (100 * f_sw) * (1 + 1e-12):
            raise DomainError(f"switched dt={dt:g} s exceeds T_sw/100")
        return dt

    def avg_dt(self, f_sw: float) -> float:
        return self.averaged_dt if self.averaged_dt is not None else 1.0 / (f_sw * AVERAGED_STEPS_PER_PERIOD)

    def check(self, f_sw: float) -> None:
        if self.dt is not None and not self.dt > 0:
            raise DomainError("dt must be > 0")
        if self.averaged_dt is not None and not self.averaged_dt > 0:
            raise DomainError("averaged_dt must be > 0")
        if self.t_end < 10.0 / f_sw * (1 - 1e-12):
            raise DomainError(f"t_end={self.t_end:g} s is shorter than 10 switching periods")
        self.switched_dt(f_sw)


class ControllerRealization(NamedTuple):
    ki: float
    w0: float  # b3/b1
    w1: float  # b2/b1
    p0: float  # c0/b1
    p1: float  # c1/b1

    def output(self, xi: float, z1: float, z2: float) -> float:
        return xi + self.p0 * z1 + self.p1 * z2


def controller_realization(k: TypeIIIController) -> ControllerRealization:
    ki = k.a3 / k.b3
    c1 = k.a1 - ki * k.b1
    c0 = k.a2 - ki * k.b2
    return ControllerRealization(ki, k.b3 / k.b1, k.b2 / k.b1, c0 / k.b1, c1 / k.b1)


def lead_transition(rz: ControllerRealization, h: float):
    """Exact one-step map of the lead section for an input linear over ``h``.

    Returns ``(phi, gam0, gam1)`` so that
    ``z(h) = phi z(0) + gam0 e(0) + gam1 (e(h) - e(0))``.
    """
    m = np.zeros((4, 4))
    m[0, 1] = 1.0
    m[1, 0], m[1, 1], m[1, 2] = -rz.w0, -rz.w1, 1.0
    m[2, 3] = 1.0 / h
    em = expm(m * h)
    return em[:2, :2].tolist(), em[:2, 2].tolist(), em[:2, 3].tolist()


def switch_segments(t0: float, dt: float, duty: float, f_sw: float):
    """Split ``[t0, t0 + dt]`` at the carrier crossings of ``duty``.

    Returns ``(length, on)`` pairs. The modulated switch is on while the
    triangle carrier is below the duty, i.e. for carrier phases in
    ``[0, duty/2)`` and ``(1 - duty/2, 1)``.
    """
    if duty <= 0.0 or duty >= 1.0:
        return ((dt, duty >= 1.0),)
    p0 = t0 * f_sw
    p1 = p0 + dt * f_sw
    k0 = math.floor(p0)
    half = 0.5 * duty
    eps = 1e-9 * (p1 - p0)  # ignore slivers from rounding at the step ends
    cuts = [p0]
    for k in range(k0, math.floor(p1) + 1):
        for e in (k + half, k + 1.0 - half):
            if p0 + eps < e < p1 - eps:
                cuts.append(e)
    cuts.append(p1)
    out = []
    for a, b in zip(cuts, cuts[1:]):
        ph = (0.5 * (a + b)) % 1.0
        out.append(((b - a) / f_sw, ph < half or ph > 1.0 - half))
    return out


def _segment_arrays(t, ref: RefProfile, params: CircuitParams, r_load):
    idx = np.clip(np.searchsorted(ref.times, t, side="right") - 1, 0, None)
    vref = ref.values[idx]
    if r_load is not None:
        if not r_load > 0:
            raise DomainError("r_load must be > 0")
        g = np.full_like(t, 1.0 / r_load)
    else:
        # lamp drawn at rated power at the active reference
        v = np.where(vref > 0, vref, 1.0)
        g = np.where(vref > 0, params.p_load / (v * v), 0.0)
    return vref, g


def simulate_switched(
    params: CircuitParams,
    k: TypeIIIController,
    cfg: LoopConfig,
    pwm: PwmConfig,
    sim: SimConfig,
    ref_profile: RefProfile,
    *,
    initial: AveragedState | None = None,
    initial_vctrl: float | None = None,
    fixed_vctrl: float | None = None,
    r_load: float | None = None,
) -> SimTrace:
    """Closed loop with the exact switched topology in every sub-step.

    Each step is split at the carrier crossings so the pulse widths are
    exact; the control signal is sampled at the start of the step.
    ``fixed_vctrl`` bypasses the controller (open-loop run); it may be a
    constant or a function of time. ``r_load``
    fixes the load; by default it follows the reference as ``v_ref**2 / p_load``.
    """
    sim.check(pwm.f_sw)
    return _run(params, k, cfg, pwm, sim, ref_profile, True, sim.switched_dt(pwm.f_sw),
                initial, initial_vctrl, fixed_vctrl, r_load)


def simulate_averaged(
    params: CircuitParams,
    k: TypeIIIController,
    cfg: LoopConfig,
    sim: SimConfig,
    ref_profile: RefProfile,
    *,
    pwm: PwmConfig | None = None,
    initial: AveragedState | None = None,
    initial_vctrl: float | None = None,
    fixed_vctrl: float | None = None,
    r_load: float | None = None,
) -> SimTrace:
    """Closed loop on the nonlinear averaged model (continuous duty, no ripple)."""
    pwm = pwm if pwm is not None else PwmConfig(f_sw=params.f_sw)
    sim.check(pwm.f_sw)
    return _run(params, k, cfg, pwm, sim, ref_profile, False, sim.avg_dt(pwm.f_sw),
                initial, initial_vctrl, fixed_vctrl, r_load)


def _run(params, k, cfg, pwm, sim, ref, switched, dt, initial, initial_vctrl, fixed_vctrl, r_load):
    n = int(round(sim.t_end / dt))
    t = np.arange(n + 1) * dt
    vref_arr, g_arr = _segment_arrays(t, ref, params, r_load)

    lo, hi = cfg.vctrl_limits
    lo, hi = max(lo, pwm.v_l1), min(hi, pwm.v_h2)
    if not lo < hi:
        raise DomainError("control clamp and PWM bands do not overlap")
    m_gain, h_gain = cfg.modulator_gain, cfg.sensor_gain
    rz = controller_realization(k)
    ki, w0, w1, p0, p1 = rz
    aw = sim.anti_windup
    clamp = sim.diode_clamp
    closed = fixed_vctrl is None

    i_l, v_c = initial if initial is not None else (0.0, 0.0)
    xi = (initial_vctrl / m_gain) if initial_vctrl is not None else 0.0
    z1 = z2 = 0.0

    out = np.empty((8, n + 1))
    mode_col = np.empty(n + 1, dtype=np.int8)
    dcm_t = None

    phi, gam0, gam1 = lead_transition(rz, dt)
    f = stage_kernel(params, clamp)

    def rk4(h, sw, g, i_l, v_c):
        s1, s2 = sw
        h2 = h / 2
        a1, b1, c1 = f(s1, s2, i_l, v_c, g)
        a2, b2, c2 = f(s1, s2, i_l + h2 * a1, v_c + h2 * b1, g)
        a3, b3, c3 = f(s1, s2, i_l + h2 * a2, v_c + h2 * b2, g)
        a4, b4, c4 = f(s1, s2, i_l + h * a3, v_c + h * b3, g)
        h6 = h / 6
        i_l += h6 * (a1 + 2 * a2 + 2 * a3 + a4)
        v_c += h6 * (b1 + 2 * b2 + 2 * b3 + b4)
        clamped = c1 or c2 or c3 or c4
        if clamp and i_l < 0.0 and not (s1 >= 1.0 and s2 >= 1.0):
            i_l = 0.0
            clamped = True
        return i_l, v_c, clamped

    def output(v_c, i_l, s2, g):
        return (v_c + params.r_c * (1.0 - s2) * i_l) / (1.0 + params.r_c * g)

    for j in range(n + 1):
        tj = t[j]
        vref = vref_arr[j]
        g = g_arr[j]
        if closed:
            vctrl = m_gain * (xi + p0 * z1 + p1 * z2)
        else:
            vctrl = fixed_vctrl(tj) if callable(fixed_vctrl) else fixed_vctrl
        vctrl = lo if vctrl < lo else hi if vctrl > hi else vctrl
        mode, duty = band_duty(pwm, vctrl)
        buck = mode is Mode.BUCK
        if switched:
            segments = [(h, (1.0 if on else 0.0, 0.0) if buck else (1.0, 1.0 if on else 0.0))
                        for h, on in switch_segments(tj, dt, duty, pwm.f_sw)]
        else:
            segments = ((dt, (duty, 0.0) if buck else (1.0, duty)),)
        s1, s2 = segments[0][1]

        v_o = output(v_c, i_l, s2, g)
        out[:, j] = (tj, vref, v_o, i_l, v_c, vctrl, s1, s2)
        mode_col[j] = 0 if buck else 1
        if j == n:
            break

        clamped = False
        for h, sw in segments:
            i_l, v_c, cl = rk4(h, sw, g, i_l, v_c)
            clamped = clamped or cl
        if closed:
            # error taken as linear across the step; lead states advance exactly
            e0 = h_gain * (vref - v_o)
            e1 = h_gain * (vref - output(v_c, i_l, sw[1], g))
            if not (aw and ((vctrl >= hi and e0 > 0) or (vctrl <= lo and e0 < 0))):
                xi += ki * dt * 0.5 * (e0 + e1)
            de = e1 - e0
            z1, z2 = (phi[0][0] * z1 + phi[0][1] * z2 + gam0[0] * e0 + gam1[0] * de,
                      phi[1][0] * z1 + phi[1][1] * z2 + gam0[1] * e0 + gam1[1] * de)
        if clamped and dcm_t is None:
            dcm_t = float(tj)
        if not (math.isfinite(i_l) and math.isfinite(v_c) and math.isfinite(xi) and math.isfinite(z1) and math.isfinite(z2)):
            raise DivergenceError(float(t[j + 1]))

    return SimTrace(
        t=out[0], v_ref=out[1], v_o=out[2], i_l=out[3], v_c=out[4], v_ctrl=out[5],
        sw1=out[6], sw2=out[7], mode=mode_col,
        kind="switched" if switched else "averaged",
        period=pwm.period,
        dcm_entered=dcm_t is not None,
        dcm_first_t=dcm_t,
    )
