"""Steady-state design math for the non-inverting buck-boost power stage.

Switch and diode forward drops are taken as zero; at a few hundred volts
they are negligible next to the conversion ratio.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import DomainError, ModeAmbiguityError

DEFAULT_DEADBAND = 0.01


@dataclass(frozen=True)
class CircuitParams:
    """Plant constants. Defaults are the 18 W lamp ballast design."""

    v_in: float = 310.0
    l: float = 15e-3
    c: float = 1e-6
    r_l: float = 0.1
    r_c: float = 0.05
    f_sw: float = 40e3
    p_load: float = 18.0

    def __post_init__(self):
        for name in ("v_in", "l", "c", "r_l", "r_c", "f_sw", "p_load"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if self.f_sw < 1e3:
            raise DomainError(f"f_sw must be at least 1 kHz, got {self.f_sw!r}")

    @property
    def t_sw(self) -> float:
        return 1.0 / self.f_sw


class Mode(str, enum.Enum):
    BUCK = "buck"
    BOOST = "boost"


class SwitchState(NamedTuple):
    sw1: bool
    sw2: bool


class Conduction(str, enum.Enum):
    CCM = "CCM"
    BOUNDARY = "Boundary"
    DCM = "DCM"


@dataclass(frozen=True)
class OperatingPoint:
    mode: Mode
    v_out: float
    duty: float
    r_load: float
    i_l_avg: float
    i_out: float

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise DomainError(f"duty must lie in (0, 1), got {self.duty!r}")
        if not self.r_load > 0:
            raise DomainError(f"r_load must be > 0, got {self.r_load!r}")

    def on_time(self, params: CircuitParams) -> float:
        return self.duty / params.f_sw


def load_resistance(v_out: float, p_load: float) -> float:
    if not (v_out > 0 and p_load > 0):
        raise DomainError(f"v_out and p_load must be > 0, got {v_out!r}, {p_load!r}")
    return v_out * v_out / p_load


def operating_point(params: CircuitParams, v_target: float, deadband: float = DEFAULT_DEADBAND) -> OperatingPoint:
    """Ideal CCM operating point for ``v_target``.

    Targets strictly within ``deadband`` (fraction of v_in) of the input
    voltage are rejected: reaching them would need both switches modulating at once.
    """
    if not v_target > 0:
        raise DomainError(f"v_target must be > 0, got {v_target!r}")
    if deadband < 0:
        raise DomainError("deadband must be >= 0")
    if abs(v_target - params.v_in) < deadband * params.v_in:
        raise ModeAmbiguityError(
            f"v_target={v_target:g} V is within {deadband:.1%} of v_in={params.v_in:g} V; "
            "that would require the buck-boost switching mode, which is avoided"
        )
    r_load = load_resistance(v_target, params.p_load)
    i_out = v_target / r_load
    if v_target > params.v_in:
        duty = 1.0 - params.v_in / v_target
        return OperatingPoint(Mode.BOOST, v_target, duty, r_load, i_out / (1.0 - duty), i_out)
    duty = v_target / params.v_in
    return OperatingPoint(Mode.BUCK, v_target, duty, r_load, i_out, i_out)


def inductor_ripple(params: CircuitParams, op: OperatingPoint) -> float:
    """Peak-to-peak inductor current ripple accumulated over the on-time."""
    t_on = op.on_time(params)
    if op.mode is Mode.BUCK:
        return (params.v_in - op.v_out) / params.l * t_on
    return params.v_in / params.l * t_on


class CcmResult(NamedTuple):
    conduction: Conduction
    margin: float


def ccm_check(params: CircuitParams, op: OperatingPoint, boundary_band: float = 0.01) -> CcmResult:
    """Classify conduction by the valley current ``i_l_avg - ripple/2``."""
    margin = op.i_l_avg - inductor_ripple(params, op) / 2.0
    if abs(margin) < boundary_band * op.i_l_avg:
        return CcmResult(Conduction.BOUNDARY, margin)
    return CcmResult(Conduction.CCM if margin > 0 else Conduction.DCM, margin)
