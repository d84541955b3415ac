"""Step-response figures: rise time, settling time, overshoot, steady-state error."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SettlingUndefinedError
from .trace import SimTrace

RISE_LO = 0.1
RISE_HI = 0.9
SETTLE_BAND = 0.02
TAIL_FRACTION = 0.05


@dataclass(frozen=True)
class StepMetrics:
    """Step figures. Times in seconds, the rest as fractions.

    ``overshoot`` is relative to the step span, ``steady_state_error`` and
    ``ripple`` to the final reference. ``ripple`` is zero for averaged traces.
    """

    rise_time: float
    settling_time: float
    overshoot: float
    steady_state_error: float
    ripple: float = 0.0


def _first_crossing(t, r, level):
    """First time ``r`` reaches ``level``, linearly interpolated; inf if never."""
    above = np.nonzero(r >= level)[0]
    if len(above) == 0:
        return math.inf
    j = above[0]
    if j == 0:
        return float(t[0])
    r0, r1 = r[j - 1], r[j]
    frac = (level - r0) / (r1 - r0) if r1 != r0 else 0.0
    return float(t[j - 1] + frac * (t[j] - t[j - 1]))


def step_metrics(
    trace: SimTrace,
    step_at: float = 0.0,
    *,
    t_stop: float | None = None,
    initial: float | None = None,
    band: float = SETTLE_BAND,
) -> StepMetrics:
    """Metrics for the reference step at ``step_at``.

    The analysis window runs to the next reference change (or ``t_stop``,
    or the end of the trace). The starting level is the output at the step
    unless ``initial`` is given. Switched traces are cycle-averaged first.

    Settling time is the last entry into the band of ``band`` times the
    final reference around that reference.
    """
    t_all = trace.t
    y_all = trace.cycle_average()
    i0 = int(np.searchsorted(t_all, step_at - 1e-15 * max(1.0, abs(step_at))))
    r_final = float(trace.v_ref[min(i0, len(t_all) - 1)])
    if t_stop is None:
        later = np.nonzero((t_all > t_all[i0]) & (trace.v_ref != r_final))[0]
        i1 = int(later[0]) if len(later) else len(t_all)
    else:
        i1 = int(np.searchsorted(t_all, t_stop, side="right"))
    t = t_all[i0:i1] - t_all[i0]
    y = y_all[i0:i1]
    y0 = float(y[0]) if initial is None else float(initial)

    span = r_final - y0
    if span == 0.0:
        rise, over = 0.0, 0.0
    else:
        r = (y - y0) / span
        t_lo = _first_crossing(t, r, RISE_LO)
        t_hi = _first_crossing(t, r, RISE_HI)
        rise = t_hi - t_lo if math.isfinite(t_hi) else math.inf
        over = max(0.0, float(np.max(r)) - 1.0)

    tol = band * abs(r_final) if r_final != 0 else band * abs(span)
    outside = np.nonzero(np.abs(y - r_final) > tol)[0]
    if len(outside) == 0:
        settle = 0.0
    elif outside[-1] == len(y) - 1:
        raise SettlingUndefinedError(
            f"output still outside the ±{band:.0%} band at t={t_all[i1 - 1]:.6g} s (step at {step_at:.6g} s)"
        )
    else:
        j = outside[-1]
        # interpolate the band entry between samples j and j+1
        d0 = abs(y[j] - r_final) - tol
        d1 = abs(y[j + 1] - r_final) - tol
        frac = d0 / (d0 - d1) if d0 != d1 else 1.0
        settle = float(t[j] + frac * (t[j + 1] - t[j]))

    n_tail = max(1, int(round(TAIL_FRACTION * len(y))))
    if trace.kind == "switched":
        n_tail = max(n_tail, trace.samples_per_period)
    final = float(np.mean(y[-n_tail:]))
    denom = abs(r_final) if r_final != 0 else 1.0
    ess = abs(final - r_final) / denom
    ripple = 0.0
    if trace.kind == "switched":
        raw = trace.v_o[i0:i1][-trace.samples_per_period:]
        ripple = float(raw.max() - raw.min()) / denom
    return StepMetrics(rise, settle, over, ess, ripple)
