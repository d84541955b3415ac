"""Simulation traces, reference profiles and CSV export."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from ..errors import DomainError

CSV_HEADER = "t,v_ref,v_o,i_l,v_c,v_ctrl,sw1,sw2,mode"
MODE_NAMES = ("buck", "boost")


class RefProfile:
    """Piecewise-constant reference: ``[(t0, v0), (t1, v1), ...]``, held from each ``ti``."""

    def __init__(self, points: Iterable[tuple[float, float]]):
        pts = sorted((float(t), float(v)) for t, v in points)
        if not pts:
            raise DomainError("reference profile needs at least one point")
        self.times = np.array([p[0] for p in pts])
        self.values = np.array([p[1] for p in pts])

    @classmethod
    def constant(cls, v: float) -> "RefProfile":
        return cls([(0.0, v)])

    def __call__(self, t: float) -> float:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.values[max(k, 0)])

    def change_times(self) -> list[float]:
        return [float(t) for t in self.times[1:]]

    def __repr__(self):
        return f"RefProfile({list(zip(self.times.tolist(), self.values.tolist()))!r})"


@dataclass
class SimTrace:
    """Sampled simulation output on a uniform time grid.

    For averaged runs ``sw1``/``sw2`` hold the switch duty functions in
    [0, 1] rather than on/off states.
    """

    t: np.ndarray
    v_ref: np.ndarray
    v_o: np.ndarray
    i_l: np.ndarray
    v_c: np.ndarray
    v_ctrl: np.ndarray
    sw1: np.ndarray
    sw2: np.ndarray
    mode: np.ndarray
    kind: str = "averaged"
    period: float | None = None
    dcm_entered: bool = False
    dcm_first_t: float | None = None
    events: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.t)
        for name in ("v_ref", "v_o", "i_l", "v_c", "v_ctrl", "sw1", "sw2", "mode"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"trace column {name} has length {len(getattr(self, name))}, expected {n}")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trace time must be strictly increasing")

    @classmethod
    def from_output(cls, t: Sequence[float], v_o: Sequence[float], v_ref: Sequence[float] | float) -> "SimTrace":
        """Trace holding only an output and reference (plant columns zeroed)."""
        t = np.asarray(t, dtype=float)
        v_o = np.asarray(v_o, dtype=float)
        ref = np.broadcast_to(np.asarray(v_ref, dtype=float), t.shape).copy()
        z = np.zeros_like(t)
        return cls(t, ref, v_o, z, z.copy(), z.copy(), z.copy(), z.copy(), np.zeros(len(t), dtype=np.int8))

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def samples_per_period(self) -> int:
        if self.period is None:
            return 1
        return max(1, int(round(self.period / self.dt)))

    def cycle_average(self, values: np.ndarray | None = None) -> np.ndarray:
        """Centred one-period moving average (identity for averaged traces)."""
        y = self.v_o if values is None else values
        if self.kind != "switched":
            return np.asarray(y, dtype=float)
        return cycle_average(y, self.samples_per_period)

    def write_csv(self, out: TextIO | str | Path) -> None:
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="") as fh:
                self.write_csv(fh)
            return
        out.write(CSV_HEADER + "\n")
        cols = (self.t, self.v_ref, self.v_o, self.i_l, self.v_c, self.v_ctrl, self.sw1, self.sw2, self.mode)
        rows = zip(*(np.asarray(c).tolist() for c in cols))
        for t, r, vo, il, vc, u, s1, s2, m in rows:
            out.write(
                f"{t!r},{r!r},{vo!r},{il!r},{vc!r},{u!r},{_num(s1)},{_num(s2)},{MODE_NAMES[int(m)]}\n"
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _num(x) -> str:
    x = float(x)
    if x.is_integer():
        return str(int(x))
    return repr(x)


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Load a trace CSV back into named columns (``mode`` stays as strings)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected trace header {header!r}")
        cols: dict[str, list] = {name: [] for name in header.split(",")}
        for line in fh:
            for name, cell in zip(cols, line.rstrip("\n").split(",")):
                cols[name].append(cell)
    out = {k: np.array(v, dtype=float) for k, v in cols.items() if k != "mode"}
    out["mode"] = np.array(cols["mode"])
    return out


def cycle_average(y: np.ndarray, n: int) -> np.ndarray:
    """Centred moving average over ``n`` samples; windows shrink at the ends."""
    y = np.asarray(y, dtype=float)
    if n <= 1 or len(y) == 0:
        return y.copy()
    c = np.concatenate(([0.0], np.cumsum(y)))
    idx = np.arange(len(y))
    lo = np.clip(idx - n // 2, 0, len(y))
    hi = np.clip(lo + n, 0, len(y))
    lo = np.clip(hi - n, 0, len(y))
    return (c[hi] - c[lo]) / (hi - lo)


def ripple_pp(y: np.ndarray, period_samples: int, n_periods: int = 10) -> float:
    """Mean per-period peak-to-peak over the last ``n_periods`` whole periods.

    Measured period by period so a slow drift underneath the switching
    ripple is not counted as ripple.
    """
    y = np.asarray(y, dtype=float)
    n = max(1, int(period_samples))
    k = min(n_periods, len(y) // n)
    if k == 0:
        return math.nan
    tail = y[len(y) - k * n:].reshape(k, n)
    return float(np.mean(tail.max(axis=1) - tail.min(axis=1)))
