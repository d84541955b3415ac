"""Single-carrier PWM that never modulates both switches at once.

The control signal is split into two adjacent bands. Below ``v_h1`` it
drives SW1 (buck, SW2 open); above ``v_h1`` SW1 stays closed and the excess
drives SW2 (boost). The carrier is a unit triangle that starts at its
minimum at t = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from ..converter import Mode, SwitchState
from ..errors import DomainError


@dataclass(frozen=True)
class PwmConfig:
    f_sw: float = 40e3
    v_l1: float = 0.0
    v_h1: float = 1.0
    v_h2: float = 2.0

    def __post_init__(self):
        if not self.f_sw > 0:
            raise DomainError("f_sw must be > 0")
        if not self.v_l1 < self.v_h1 < self.v_h2:
            raise DomainError(f"need v_l1 < v_h1 < v_h2, got {self.v_l1}, {self.v_h1}, {self.v_h2}")

    @property
    def period(self) -> float:
        return 1.0 / self.f_sw


class PwmOutput(NamedTuple):
    switches: SwitchState
    mode: Mode
    duty: float


def carrier(t: float, f_sw: float) -> float:
    phase = (t * f_sw) % 1.0
    return 1.0 - abs(2.0 * phase - 1.0)


def band_duty(cfg: PwmConfig, v_ctrl: float) -> tuple[Mode, float]:
    """Mode and duty of the modulated switch for a (clamped) control signal."""
    v = min(max(v_ctrl, cfg.v_l1), cfg.v_h2)
    if v <= cfg.v_h1:
        return Mode.BUCK, (v - cfg.v_l1) / (cfg.v_h1 - cfg.v_l1)
    return Mode.BOOST, (v - cfg.v_h1) / (cfg.v_h2 - cfg.v_h1)


def _compare(duty: float, c: float) -> bool:
    return duty >= 1.0 or duty > c


def pwm_states(cfg: PwmConfig, v_ctrl: float, t: float) -> PwmOutput:
    mode, duty = band_duty(cfg, v_ctrl)
    c = carrier(t, cfg.f_sw)
    if mode is Mode.BUCK:
        return PwmOutput(SwitchState(_compare(duty, c), False), mode, duty)
    return PwmOutput(SwitchState(True, _compare(duty, c)), mode, duty)


def vctrl_for_duty(cfg: PwmConfig, mode: Mode, duty: float) -> float:
    """Inverse of :func:`band_duty`."""
    if not 0.0 <= duty <= 1.0 or math.isnan(duty):
        raise DomainError(f"duty must lie in [0, 1], got {duty!r}")
    if mode is Mode.BUCK:
        return cfg.v_l1 + duty * (cfg.v_h1 - cfg.v_l1)
    return cfg.v_h1 + duty * (cfg.v_h2 - cfg.v_h1)
