"""Small-signal control-to-output models of the power stage.

Two independent routes to the same transfer functions:

* closed-form constructors built from the filter impedances
  ``Z1 = r_L + sL`` and ``Z2 = R || (r_C + 1/sC)``;
* :func:`linearize_numeric`, which finds the equilibrium of the nonlinear
  averaged circuit and linearizes it by central differences.

The second route is the referee for the first. For the boost stage it
settles which coefficient multiplies ``s`` in the denominator: the
dimensionally consistent assignment (``beta`` on ``s``, ``gamma`` constant)
matches the averaged circuit, the swapped one does not.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .converter import CircuitParams, Mode, OperatingPoint
from .errors import ConvergenceError, DomainError, ModeError
from .ratfun import Polynomial, RationalTransferFunction

EQUILIBRIUM_TOL = 1e-10
EQUILIBRIUM_MAX_ITER = 200
FD_REL_STEP = 1e-6
FD_ABS_STEP = 1e-9


class AveragedState(NamedTuple):
    i_l: float
    v_c: float


class PlantInputs(NamedTuple):
    duty: float
    v_i: float = 0.0
    i_o: float = 0.0


class Derivatives(NamedTuple):
    di_l: float
    dv_c: float
    v_o: float


def impedance_z1(params: CircuitParams) -> RationalTransferFunction:
    return RationalTransferFunction(Polynomial((params.r_l, params.l)), Polynomial((1.0,)))


def impedance_z2(params: CircuitParams, r_load: float) -> RationalTransferFunction:
    if not r_load > 0:
        raise DomainError(f"r_load must be > 0, got {r_load!r}")
    c, r_c = params.c, params.r_c
    return RationalTransferFunction(
        Polynomial((r_load, r_load * c * r_c)),
        Polynomial((1.0, c * (r_load + r_c))),
    )


def buck_plant_tf(params: CircuitParams, op: OperatingPoint) -> RationalTransferFunction:
    if op.mode is not Mode.BUCK:
        raise ModeError(f"buck plant requested for a {op.mode.value} operating point")
    v_in, l, c, r_l, r_c = params.v_in, params.l, params.c, params.r_l, params.r_c
    r = op.r_load
    lc = l * c * (r + r_c)
    gain = v_in * r * r_c / (l * (r + r_c))
    num = Polynomial((gain / (c * r_c), gain))
    den = Polynomial(((r + r_l) / lc, (c * (r * r_c + r * r_l + r_c * r_l) + l) / lc, 1.0))
    return RationalTransferFunction(num, den)


def _boost_terms(params: CircuitParams, op: OperatingPoint):
    if op.mode is not Mode.BOOST:
        raise ModeError(f"boost plant requested for a {op.mode.value} operating point")
    l, c, r_l, r_c = params.l, params.c, params.r_l, params.r_c
    r, d = op.r_load, op.duty
    m = (1.0 - d) ** 2
    lc = l * c * (r + r_c)
    gain = op.v_out * r_c / ((d - 1.0) * (r + r_c))
    esr_zero = 1.0 / (c * r_c)
    rhp_zero = (r * m - r_l) / l
    beta = (c * (r_l * (r + r_c) + m * r * r_c) + l) / lc
    gamma = (r_l + m * r) / lc
    num = Polynomial((esr_zero, 1.0)) * Polynomial((-rhp_zero, 1.0)) * gain
    return num, beta, gamma


def boost_plant_tf(params: CircuitParams, op: OperatingPoint) -> RationalTransferFunction:
    num, beta, gamma = _boost_terms(params, op)
    return RationalTransferFunction(num, Polynomial((gamma, beta, 1.0)))


def boost_plant_tf_swapped(params: CircuitParams, op: OperatingPoint) -> RationalTransferFunction:
    """Boost plant with the s-coefficient and constant term exchanged.

    This is the dimensionally inconsistent reading (an s^-2 quantity on
    the s term). Kept only so tests can show the numeric linearization
    rejects it.
    """
    num, beta, gamma = _boost_terms(params, op)
    return RationalTransferFunction(num, Polynomial((beta, gamma, 1.0)))


def plant_tf(params: CircuitParams, op: OperatingPoint) -> RationalTransferFunction:
    if op.mode is Mode.BUCK:
        return buck_plant_tf(params, op)
    return boost_plant_tf(params, op)


def rhp_zero(params: CircuitParams, op: OperatingPoint) -> float:
    """Location (rad/s) of the boost right-half-plane zero."""
    if op.mode is not Mode.BOOST:
        raise ModeError("only the boost stage has a right-half-plane zero")
    return (op.r_load * (1.0 - op.duty) ** 2 - params.r_l) / params.l


def stage_derivatives(params: CircuitParams, s1: float, s2: float, i_l: float, v_c: float,
                      g_load: float, v_i: float = 0.0, i_o: float = 0.0, diode_clamp: bool = False):
    """Power-stage derivatives written with switch functions ``s1``, ``s2``.

    With ``s1, s2`` in {0, 1} these are the exact switched topologies; with
    duty values in [0, 1] they are the period-averaged equations (buck:
    ``s1 = d, s2 = 0``; boost: ``s1 = 1, s2 = d``). The load is given as a
    conductance so an open-circuit load is ``g_load = 0``.

    Returns ``(di_l, dv_c, v_o, clamped)``.
    """
    i_inj = (1.0 - s2) * i_l
    r_c = params.r_c
    v_o = (v_c + r_c * (i_inj - i_o)) / (1.0 + r_c * g_load)
    di = (s1 * (params.v_in + v_i) - (1.0 - s2) * v_o - params.r_l * i_l) / params.l
    clamped = False
    # the only path that can carry reverse current is SW1 and SW2 both closed
    if diode_clamp and i_l <= 0.0 and di < 0.0 and not (s1 >= 1.0 and s2 >= 1.0):
        di = 0.0
        clamped = True
    dv = (i_inj - i_o - g_load * v_o) / params.c
    return di, dv, v_o, clamped


def stage_kernel(params: CircuitParams, diode_clamp: bool = False):
    """:func:`stage_derivatives` with no perturbation inputs, constants bound once.

    The simulators call this millions of times; binding the circuit values
    as locals roughly halves the per-call cost.
    """
    v_in, r_l, r_c, inv_l, inv_c = params.v_in, params.r_l, params.r_c, 1.0 / params.l, 1.0 / params.c

    def f(s1, s2, i_l, v_c, g_load):
        i_inj = (1.0 - s2) * i_l
        v_o = (v_c + r_c * i_inj) / (1.0 + r_c * g_load)
        di = (s1 * v_in - (1.0 - s2) * v_o - r_l * i_l) * inv_l
        if diode_clamp and i_l <= 0.0 and di < 0.0 and not (s1 >= 1.0 and s2 >= 1.0):
            return 0.0, (i_inj - g_load * v_o) * inv_c, True
        return di, (i_inj - g_load * v_o) * inv_c, False

    return f


def switch_functions(mode: Mode, duty: float) -> tuple[float, float]:
    if mode is Mode.BUCK:
        return duty, 0.0
    return 1.0, duty


def averaged_derivatives(
    params: CircuitParams,
    mode: Mode,
    state: AveragedState,
    inputs: PlantInputs,
    r_load: float,
    diode_clamp: bool = False,
) -> Derivatives:
    """Time derivatives of the period-averaged inductor current and capacitor voltage.

    The output voltage is resolved exactly from the output node, keeping the
    capacitor ESR in the loop:
    ``v_o = R (v_c + r_C (i_inject - i_o)) / (R + r_C)``.
    ``r_load = math.inf`` models an open-circuit load.
    """
    if not r_load > 0:
        raise DomainError(f"r_load must be > 0, got {r_load!r}")
    s1, s2 = switch_functions(mode, inputs.duty)
    di, dv, v_o, _ = stage_derivatives(
        params, s1, s2, state.i_l, state.v_c, 1.0 / r_load, inputs.v_i, inputs.i_o, diode_clamp
    )
    return Derivatives(di, dv, v_o)


def averaged_steady_state(params: CircuitParams, mode: Mode, duty: float, r_load: float) -> AveragedState:
    """Closed-form equilibrium of the averaged model (no DCM)."""
    r_l = params.r_l
    if mode is Mode.BUCK:
        v_o = duty * params.v_in * r_load / (r_load + r_l)
        return AveragedState(v_o / r_load, v_o)
    m = 1.0 - duty
    v_o = params.v_in / (m + r_l / (r_load * m))
    return AveragedState(v_o / (r_load * m), v_o)


def _residual(params, op, x, duty):
    d = averaged_derivatives(params, op.mode, AveragedState(x[0], x[1]), PlantInputs(duty), op.r_load)
    return np.array([d.di_l, d.dv_c])


def averaged_equilibrium(params: CircuitParams, op: OperatingPoint, duty: float | None = None) -> AveragedState:
    """Equilibrium of the averaged model at ``duty`` (default ``op.duty``).

    Newton iteration with a finite-difference Jacobian and step halving,
    started from the ideal operating point.
    """
    duty = op.duty if duty is None else duty
    x = np.array([op.i_l_avg, op.v_out], dtype=float)
    # residuals rescaled to volts across L over v_in and amps into C over i_out
    scale = np.array([params.v_in / params.l, max(abs(op.i_out), 1e-9) / params.c])
    f = _residual(params, op, x, duty)
    for _ in range(EQUILIBRIUM_MAX_ITER):
        if np.max(np.abs(f / scale)) < EQUILIBRIUM_TOL:
            return AveragedState(float(x[0]), float(x[1]))
        jac = _jacobian(lambda y: _residual(params, op, y, duty), x)
        step = np.linalg.solve(jac, -f)
        lam = 1.0
        while lam > 1e-6:
            trial = x + lam * step
            ft = _residual(params, op, trial, duty)
            if np.linalg.norm(ft / scale) < np.linalg.norm(f / scale):
                break
            lam *= 0.5
        x, f = trial, ft
    if np.max(np.abs(f / scale)) < EQUILIBRIUM_TOL:
        return AveragedState(float(x[0]), float(x[1]))
    raise ConvergenceError(f"averaged equilibrium did not converge in {EQUILIBRIUM_MAX_ITER} iterations")


def _fd_step(x: float) -> float:
    return max(FD_REL_STEP * abs(x), FD_ABS_STEP)


def _jacobian(fun, x):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(len(x)):
        h = _fd_step(x[k])
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((fun(xp) - fun(xm)) / (2 * h))
    return np.column_stack(cols)


def linearize_numeric(params: CircuitParams, op: OperatingPoint) -> RationalTransferFunction:
    """Duty-to-output transfer function of the averaged model, by finite differences."""
    eq = averaged_equilibrium(params, op)
    x0 = np.array(eq, dtype=float)
    d0 = op.duty

    def full(x, d):
        r = averaged_derivatives(params, op.mode, AveragedState(x[0], x[1]), PlantInputs(d), op.r_load)
        return np.array([r.di_l, r.dv_c, r.v_o])

    jx = _jacobian(lambda x: full(x, d0), x0)
    hd = _fd_step(d0)
    jd = (full(x0, d0 + hd) - full(x0, d0 - hd)) / (2 * hd)
    a, b = jx[:2, :], jd[:2]
    c_row, d_ff = jx[2, :], jd[2]
    return state_space_to_tf(a, b, c_row, d_ff)


def state_space_to_tf(a, b, c_row, d_ff) -> RationalTransferFunction:
    """``c (sI - A)^-1 b + d`` for a 2x2 system, via the adjugate."""
    (a11, a12), (a21, a22) = a
    b1, b2 = b
    c1, c2 = c_row
    char = Polynomial((a11 * a22 - a12 * a21, -(a11 + a22), 1.0))
    cadjb = Polynomial((
        -c1 * a22 * b1 + c1 * a12 * b2 + c2 * a21 * b1 - c2 * a11 * b2,
        c1 * b1 + c2 * b2,
    ))
    num = cadjb + char * d_ff
    return RationalTransferFunction(num, char)


def max_mismatch(tf_a: RationalTransferFunction, tf_b: RationalTransferFunction, freqs_hz) -> tuple[float, float]:
    """Worst relative magnitude error and worst phase error (degrees) of ``tf_a`` vs ``tf_b``."""
    w = 2 * math.pi * np.asarray(freqs_hz, dtype=float)
    ha, hb = tf_a.freqresp(w), tf_b.freqresp(w)
    mag = np.max(np.abs(np.abs(ha) / np.abs(hb) - 1.0))
    phase = np.max(np.abs(np.degrees(np.angle(ha / hb))))
    return float(mag), float(phase)
