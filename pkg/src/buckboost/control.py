"""Type-III compensator, loop assembly, margins and performance gating."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple, Optional

import numpy as np

from .errors import DomainError
from .ratfun import Polynomial, RationalTransferFunction, series, scale, unity_feedback

if TYPE_CHECKING:
    from .sim.metrics import StepMetrics

STABILITY_EPS = 1e-6
DEFAULT_BAND = (1.0, 1e6)
GRID_POINTS = 400
BISECT_RTOL = 1e-6


@dataclass(frozen=True)
class TypeIIIController:
    """``K(s) = (a1 s^2 + a2 s + a3) / (s (b1 s^2 + b2 s + b3))``.

    Defaults are the reference coefficient set for the 18 W ballast stage.
    """

    a1: float = 1.9e-6
    a2: float = 0.012915
    a3: float = 80.0
    b1: float = 6.8e-12
    b2: float = 3.0e-6
    b3: float = 1.5

    def __post_init__(self):
        for name in ("a1", "a2", "a3", "b1", "b2", "b3"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not (self.b1 > 0 and self.b3 > 0):
            raise DomainError("b1 and b3 must be > 0")
        if not self.a3 > 0:
            raise DomainError("a3 must be > 0 (integral action)")

    @property
    def integral_gain(self) -> float:
        return self.a3 / self.b3

    def scaled(self, k: float) -> "TypeIIIController":
        return TypeIIIController(self.a1 * k, self.a2 * k, self.a3 * k, self.b1, self.b2, self.b3)


@dataclass(frozen=True)
class LoopConfig:
    """Gains around the loop and the control-signal clamp.

    The upper clamp of 1.8 caps the boost duty at 0.8 with the default
    PWM bands. Letting the controller reach 2.0 (boost duty 1) shorts the
    inductor permanently and the output collapses; see the README.
    """

    sensor_gain: float = 1.0
    modulator_gain: float = 1.0
    vctrl_limits: tuple[float, float] = (0.0, 1.8)

    def __post_init__(self):
        if not (self.sensor_gain > 0 and self.modulator_gain > 0):
            raise DomainError("sensor and modulator gains must be > 0")
        lo, hi = self.vctrl_limits
        if not lo < hi:
            raise DomainError(f"vctrl_limits must satisfy min < max, got {self.vctrl_limits!r}")
        object.__setattr__(self, "vctrl_limits", (float(lo), float(hi)))


@dataclass(frozen=True)
class MarginReport:
    gain_margin_db: Optional[float]
    phase_margin_deg: Optional[float]
    gain_crossover_hz: Optional[float]
    phase_crossover_hz: Optional[float]

    @property
    def stable_margins(self) -> bool:
        """Both margins positive; an absent crossover counts as unlimited margin."""
        gm_ok = self.gain_margin_db is None or self.gain_margin_db > 0
        pm_ok = self.phase_margin_deg is None or self.phase_margin_deg > 0
        return gm_ok and pm_ok


@dataclass(frozen=True)
class PerformanceGoals:
    """Step-response bounds. Rise, settling and overshoot are strict upper bounds.

    ``steady_state_error_max`` defaults to 0.1 %, the numerical stand-in for
    "zero steady-state error".
    """

    rise_time_max: float = 0.1e-3
    settling_time_max: float = 0.25e-3
    steady_state_error_max: float = 1e-3
    overshoot_max: float = 0.15

    def __post_init__(self):
        if not (self.rise_time_max > 0 and self.settling_time_max > 0 and self.overshoot_max > 0):
            raise DomainError("rise, settling and overshoot bounds must be > 0")
        if self.steady_state_error_max < 0:
            raise DomainError("steady_state_error_max must be >= 0")


def type_iii_tf(k: TypeIIIController) -> RationalTransferFunction:
    return RationalTransferFunction(Polynomial((k.a3, k.a2, k.a1)), Polynomial((0.0, k.b3, k.b2, k.b1)))


def loop_gain(plant: RationalTransferFunction, k: TypeIIIController, cfg: LoopConfig = LoopConfig()) -> RationalTransferFunction:
    return series(scale(cfg.sensor_gain * cfg.modulator_gain, type_iii_tf(k)), plant)


def closed_loop(plant: RationalTransferFunction, k: TypeIIIController, cfg: LoopConfig = LoopConfig()) -> RationalTransferFunction:
    """Reference-to-output closure.

    The reference is scaled by the sensor gain before the summing junction,
    so DC tracking stays exact for any sensor gain.
    """
    return unity_feedback(loop_gain(plant, k, cfg))


class StabilityResult(NamedTuple):
    stable: bool
    poles: np.ndarray


def stability_check(tf: RationalTransferFunction, eps: float = STABILITY_EPS) -> StabilityResult:
    poles = tf.poles()
    return StabilityResult(bool(np.all(poles.real < -eps)), poles)


def _bisect(fun, lo, hi):
    """Root of ``fun`` in log-frequency between ``lo`` and ``hi`` (sign change assumed)."""
    flo = fun(lo)
    while hi / lo - 1.0 > BISECT_RTOL:
        mid = math.sqrt(lo * hi)
        fm = fun(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return math.sqrt(lo * hi)


def margins(loop: RationalTransferFunction, band: tuple[float, float] = DEFAULT_BAND, n_grid: int = GRID_POINTS) -> MarginReport:
    """Gain and phase margins of ``loop`` within ``band`` (Hz).

    Crossings are bracketed on a log grid and refined by bisection. When
    several crossings exist the one with the smallest margin is reported.
    """
    f_lo, f_hi = band
    if not 0 < f_lo < f_hi:
        raise DomainError(f"band must satisfy 0 < f_lo < f_hi, got {band!r}")
    f = np.logspace(math.log10(f_lo), math.log10(f_hi), n_grid)
    h = loop.freqresp(2 * math.pi * f)
    mag = np.abs(h)
    phase = np.unwrap(np.angle(h))

    def resp(x):
        return complex(loop(1j * 2 * math.pi * x))

    def local_phase(i, x):
        return phase[i] + np.angle(resp(x) / h[i])

    pm = gc = None
    logmag = np.log(mag)
    for i in np.nonzero(np.diff(np.sign(logmag)) != 0)[0]:
        x = _bisect(lambda y: math.log(abs(resp(y))), f[i], f[i + 1])
        m = 180.0 + math.degrees(local_phase(i, x))
        m = (m + 180.0) % 360.0 - 180.0
        if pm is None or m < pm:
            pm, gc = m, x

    gm = pc = None
    # phase crosses an odd multiple of 180 degrees
    q = np.floor((phase - math.pi) / (2 * math.pi))
    for i in np.nonzero(np.diff(q) != 0)[0]:
        target = math.pi + 2 * math.pi * max(q[i], q[i + 1])
        x = _bisect(lambda y: local_phase(i, y) - target, f[i], f[i + 1])
        g = -20.0 * math.log10(abs(resp(x)))
        if gm is None or g < gm:
            gm, pc = g, x
    return MarginReport(gm, pm, gc, pc)


class GateResult(NamedTuple):
    checks: dict
    passed: bool


def goal_gate(metrics: "StepMetrics", goals: PerformanceGoals = PerformanceGoals()) -> GateResult:
    """Compare step metrics against the goals, field by field.

    For switched traces the steady-state error bound is widened by the
    measured output ripple; averaged traces get no allowance.
    """
    ess_allow = goals.steady_state_error_max + getattr(metrics, "ripple", 0.0)
    checks = {
        "rise_time": metrics.rise_time < goals.rise_time_max,
        "settling_time": metrics.settling_time < goals.settling_time_max,
        "steady_state_error": metrics.steady_state_error <= ess_allow,
        "overshoot": metrics.overshoot < goals.overshoot_max,
    }
    return GateResult(checks, all(checks.values()))
