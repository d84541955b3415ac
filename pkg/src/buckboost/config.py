"""Flat ``key = value`` run configuration.

One entry per line, ``#`` starts a comment, SI units, scientific notation
accepted. Step sizes may be ``auto`` (resolved from the switching
frequency). Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .control import LoopConfig, TypeIIIController
from .converter import DEFAULT_DEADBAND, CircuitParams
from .errors import BuckBoostError, DomainError
from .sim.engine import SimConfig
from .sim.pwm import PwmConfig


class ConfigError(BuckBoostError, ValueError):
    pass


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class RunConfig:
    v_in: float = 310.0
    l: float = 15e-3
    c: float = 1e-6
    r_l: float = 0.1
    r_c: float = 0.05
    f_sw: float = 40e3
    p_load: float = 18.0
    a1: float = 1.9e-6
    a2: float = 0.012915
    a3: float = 80.0
    b1: float = 6.8e-12
    b2: float = 3.0e-6
    b3: float = 1.5
    sensor_gain: float = 1.0
    modulator_gain: float = 1.0
    vctrl_min: float = 0.0
    vctrl_max: float = 1.8
    v_l1: float = 0.0
    v_h1: float = 1.0
    v_h2: float = 2.0
    dt: float | None = None
    averaged_dt: float | None = None
    t_end: float = 4e-3
    diode_clamp: bool = True
    anti_windup: bool = True
    v_ref_boost: float = 400.0
    v_ref_buck: float = 280.0
    deadband: float = DEFAULT_DEADBAND
    t_switch: float = 10e-3
    t_end_ignition: float = 16e-3

    def __post_init__(self):
        # build every component once so their invariants are checked on load
        try:
            self.circuit()
            self.controller()
            self.loop()
            self.pwm()
            sim = self.sim()
            sim.check(self.f_sw)
            dataclasses.replace(sim, t_end=self.t_end_ignition).check(self.f_sw)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        for name in ("v_ref_boost", "v_ref_buck", "t_switch"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0 <= self.deadband < 1:
            raise ConfigError("deadband must lie in [0, 1)")
        if not self.t_switch < self.t_end_ignition:
            raise ConfigError("t_switch must be earlier than t_end_ignition")

    def circuit(self) -> CircuitParams:
        return CircuitParams(self.v_in, self.l, self.c, self.r_l, self.r_c, self.f_sw, self.p_load)

    def controller(self) -> TypeIIIController:
        return TypeIIIController(self.a1, self.a2, self.a3, self.b1, self.b2, self.b3)

    def loop(self) -> LoopConfig:
        return LoopConfig(self.sensor_gain, self.modulator_gain, (self.vctrl_min, self.vctrl_max))

    def pwm(self) -> PwmConfig:
        return PwmConfig(self.f_sw, self.v_l1, self.v_h1, self.v_h2)

    def sim(self, t_end: float | None = None) -> SimConfig:
        return SimConfig(self.dt, self.t_end if t_end is None else t_end, self.averaged_dt,
                         self.diode_clamp, self.anti_windup)

    # -- text form -------------------------------------------------------

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_pairs(cls, pairs, base: "RunConfig | None" = None) -> "RunConfig":
        values = {} if base is None else dataclasses.asdict(base)
        known = {f.name: f for f in fields(cls)}
        for key, raw in pairs:
            key = key.strip()
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _parse_value(key, raw.strip(), known[key].type)
        return cls(**values)

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        pairs = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, value = line.split("=", 1)
            pairs.append((key, value))
        return cls.from_pairs(pairs, base)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    def with_overrides(self, overrides: list[str]) -> "RunConfig":
        pairs = []
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override must be key=value, got {item!r}")
            pairs.append(tuple(item.split("=", 1)))
        return self.from_pairs(pairs, self)

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                text = "auto"
            elif isinstance(v, bool):
                text = "true" if v else "false"
            else:
                text = repr(float(v))
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"


def _parse_value(key: str, raw: str, typ) -> object:
    typ = str(typ)
    if "bool" in typ:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if "None" in typ and raw.lower() == "auto":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value
