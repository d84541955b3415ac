"""Command-line front end: ``buckboost {design,bode,margins,step}``.

Exit codes: 0 ok, 2 usage or invalid input, 3 margin failure,
4 performance gate failure (or settling undefined), 5 divergence.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import logging
import math
import sys

import numpy as np

from .config import ConfigError, RunConfig
from .control import PerformanceGoals, closed_loop, goal_gate, loop_gain, margins, stability_check
from .converter import Mode, ccm_check, inductor_ripple, operating_point
from .errors import BuckBoostError, DivergenceError, DomainError, SettlingUndefinedError
from .ratfun import RationalTransferFunction
from .sim.scenarios import MODELS, nominal_step, run_ignition
from .smallsignal import plant_tf, rhp_zero

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MARGIN = 3
EXIT_GATE = 4
EXIT_DIVERGED = 5

log = logging.getLogger("buckboost")


def fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(x)
    return f"{float(x):.6g}"


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    return cfg.with_overrides(args.set or [])


def _plant_for(cfg: RunConfig, mode: Mode):
    params = cfg.circuit()
    v = cfg.v_ref_boost if mode is Mode.BOOST else cfg.v_ref_buck
    op = operating_point(params, v, cfg.deadband)
    if op.mode is not mode:
        raise DomainError(f"v_ref={v:g} V gives a {op.mode.value} operating point, not {mode.value}")
    return params, op, plant_tf(params, op)


# -- design -----------------------------------------------------------------

def cmd_design(cfg: RunConfig, out) -> int:
    params = cfg.circuit()
    out.write("converter design\n")
    out.write(f"  v_in = {fmt(params.v_in)} V, L = {fmt(params.l)} H, C = {fmt(params.c)} F, "
              f"r_L = {fmt(params.r_l)} ohm, r_C = {fmt(params.r_c)} ohm\n")
    out.write(f"  f_sw = {fmt(params.f_sw)} Hz, P_load = {fmt(params.p_load)} W\n")
    kv = []
    for label, v in (("boost", cfg.v_ref_boost), ("buck", cfg.v_ref_buck)):
        op = operating_point(params, v, cfg.deadband)
        ccm = ccm_check(params, op)
        ripple = inductor_ripple(params, op)
        dc = plant_tf(params, op).dc_gain()
        out.write(f"\n{label} target {fmt(v)} V -> {op.mode.value} mode\n")
        out.write(f"  duty           {fmt(op.duty)}\n")
        out.write(f"  load           {fmt(op.r_load)} ohm, i_out {fmt(op.i_out)} A\n")
        out.write(f"  inductor avg   {fmt(op.i_l_avg)} A, ripple p-p {fmt(ripple)} A\n")
        out.write(f"  conduction     {ccm.conduction.value} (valley margin {fmt(ccm.margin)} A)\n")
        out.write(f"  plant dc gain  {fmt(dc)} V/unit duty\n")
        row = [("mode", op.mode.value), ("duty", fmt(op.duty)), ("r_load", fmt(op.r_load)),
               ("i_l_avg", fmt(op.i_l_avg)), ("ripple_pp", fmt(ripple)),
               ("conduction", ccm.conduction.value), ("ccm_margin", fmt(ccm.margin)), ("dc_gain", fmt(dc))]
        if op.mode is Mode.BOOST:
            z = rhp_zero(params, op)
            out.write(f"  rhp zero       {fmt(z)} rad/s ({fmt(z / (2 * math.pi))} Hz)\n")
            row += [("rhp_zero_rad_s", fmt(z)), ("rhp_zero_hz", fmt(z / (2 * math.pi)))]
        kv += [(f"{label}.{k}", val) for k, val in row]
    out.write("\n")
    for k, val in kv:
        out.write(f"{k}={val}\n")
    return EXIT_OK


# -- bode -------------------------------------------------------------------

def cmd_bode(cfg: RunConfig, mode: Mode, f_lo: float, f_hi: float, n_points: int, loop: bool, out) -> int:
    if not (0 < f_lo and (f_lo < f_hi or (n_points == 1 and f_lo <= f_hi)) and n_points >= 1):
        raise DomainError(f"bad frequency band: f_lo={f_lo!r}, f_hi={f_hi!r}, points={n_points!r}")
    _, _, tf = _plant_for(cfg, mode)
    if loop:
        tf = loop_gain(tf, cfg.controller(), cfg.loop())
    if n_points == 1:
        f = np.array([f_lo])
    else:
        f = np.logspace(math.log10(f_lo), math.log10(f_hi), n_points)
    h = tf.freqresp(2 * math.pi * f)
    mag = 20 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))
    out.write("f_hz,mag_db,phase_deg\n")
    for row in zip(f.tolist(), mag.tolist(), phase.tolist()):
        out.write(",".join(repr(x) for x in row) + "\n")
    return EXIT_OK


# -- margins ----------------------------------------------------------------

def cmd_margins(cfg: RunConfig, mode: Mode, out, gain_scale: float = 1.0, unity_plant: bool = False) -> int:
    k = cfg.controller()
    if gain_scale != 1.0:
        if not gain_scale > 0:
            raise DomainError("gain scale must be > 0")
        k = k.scaled(gain_scale)
    if unity_plant:
        plant = RationalTransferFunction.constant(1.0)
    else:
        _, _, plant = _plant_for(cfg, mode)
    lg = loop_gain(plant, k, cfg.loop())
    rep = margins(lg)
    stab = stability_check(closed_loop(plant, k, cfg.loop()))
    ok = rep.stable_margins and stab.stable
    out.write(f"{mode.value} loop margins\n")
    out.write(f"  gain crossover   {fmt(rep.gain_crossover_hz)} Hz\n")
    out.write(f"  phase margin     {fmt(rep.phase_margin_deg)} deg\n")
    out.write(f"  phase crossover  {fmt(rep.phase_crossover_hz)} Hz\n")
    out.write(f"  gain margin      {fmt(rep.gain_margin_db)} dB\n")
    out.write(f"  closed loop      {'stable' if stab.stable else 'UNSTABLE'}\n")
    out.write(f"  verdict          {'PASS' if ok else 'FAIL'}\n\n")
    for key, v in (("mode", mode.value), ("gain_crossover_hz", fmt(rep.gain_crossover_hz)),
                   ("phase_margin_deg", fmt(rep.phase_margin_deg)),
                   ("phase_crossover_hz", fmt(rep.phase_crossover_hz)),
                   ("gain_margin_db", fmt(rep.gain_margin_db)),
                   ("closed_loop_stable", fmt(stab.stable)), ("pass", fmt(ok))):
        out.write(f"{key}={v}\n")
    return EXIT_OK if ok else EXIT_MARGIN


# -- step -------------------------------------------------------------------

def _metrics_block(out, label, m, goals):
    gate = goal_gate(m, goals)
    out.write(f"{label}\n")
    out.write("  t_r,t_s,e_ss,M_p\n")
    out.write(f"  {fmt(m.rise_time)},{fmt(m.settling_time)},{fmt(m.steady_state_error)},{fmt(m.overshoot)}\n")
    if m.ripple:
        out.write(f"  ripple {fmt(m.ripple)}\n")
    for name, passed in gate.checks.items():
        out.write(f"  {name:<20s}{'pass' if passed else 'FAIL'}\n")
    return gate.passed


def cmd_step(cfg: RunConfig, mode: Mode | None, model: str, out, trace_out=None) -> int:
    params, k, loop, pwm = cfg.circuit(), cfg.controller(), cfg.loop(), cfg.pwm()
    goals = PerformanceGoals()
    passed = True
    if mode is None:
        sim = cfg.sim(t_end=cfg.t_end_ignition)
        if model == "linear":
            raise DomainError("the ignition sequence needs the averaged or switched model")
        run = run_ignition(params, k, loop, pwm, sim, cfg.v_ref_boost, cfg.v_ref_buck, cfg.t_switch, model)
        trace = run.trace
        out.write(f"ignition sequence ({model}): {fmt(cfg.v_ref_boost)} V then {fmt(cfg.v_ref_buck)} V "
                  f"at {fmt(cfg.t_switch)} s\n")
        for name, m in (("boost segment", run.boost), ("buck segment", run.buck)):
            key = name.split()[0]
            if m is None:
                out.write(f"{name}\n  settling undefined: {run.errors[key]}\n")
                passed = False
            else:
                passed = _metrics_block(out, name, m, goals) and passed
    else:
        sim = cfg.sim()
        v = cfg.v_ref_boost if mode is Mode.BOOST else cfg.v_ref_buck
        run = nominal_step(params, k, loop, pwm, sim, v, model)
        trace = run.trace
        out.write(f"{mode.value} step ({model}): {fmt(run.v_from)} V -> {fmt(run.v_to)} V\n")
        passed = _metrics_block(out, f"{mode.value} step", run.metrics, goals)
    out.write(f"dcm_entered={fmt(trace.dcm_entered)}\n")
    if trace.dcm_entered:
        out.write(f"dcm_first_t={fmt(trace.dcm_first_t)}\n")
    out.write(f"gate={'pass' if passed else 'fail'}\n")
    if trace_out is not None:
        trace.write_csv(trace_out)
    return EXIT_OK if passed else EXIT_GATE


# -- argument handling --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry (repeatable)")
    common.add_argument("--out", help="write the main output here instead of stdout")

    p = argparse.ArgumentParser(prog="buckboost", description="Non-inverting buck-boost converter design and simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", parents=[common], help="operating points, ripple, conduction, plant figures")
    d.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")

    b = sub.add_parser("bode", parents=[common], help="frequency response CSV")
    b.add_argument("--mode", choices=[m.value for m in Mode], default="boost")
    b.add_argument("--f-lo", type=float, default=10.0)
    b.add_argument("--f-hi", type=float, default=100e3)
    b.add_argument("--points", type=int, default=400)
    b.add_argument("--loop", action="store_true", help="loop gain instead of the bare plant")

    m = sub.add_parser("margins", parents=[common], help="gain/phase margins of the loop")
    m.add_argument("--mode", choices=[m.value for m in Mode], default="boost")
    m.add_argument("--gain-scale", type=float, default=1.0, help="multiply the controller numerator")
    m.add_argument("--unity-plant", action="store_true", help=argparse.SUPPRESS)

    s = sub.add_parser("step", parents=[common], help="closed-loop step; without --mode runs the ignition sequence")
    s.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    s.add_argument("--model", choices=MODELS, default="averaged")
    s.add_argument("--report", help="write the metrics report here (default stdout, or stdout when --out holds the trace)")
    return p


def _run(args, out) -> int:
    cfg = _load_config(args)
    if args.command == "design":
        if args.dump_config:
            out.write(cfg.dump())
            return EXIT_OK
        return cmd_design(cfg, out)
    if args.command == "bode":
        return cmd_bode(cfg, Mode(args.mode), args.f_lo, args.f_hi, args.points, args.loop, out)
    if args.command == "margins":
        return cmd_margins(cfg, Mode(args.mode), out, args.gain_scale, args.unity_plant)
    if args.command == "step":
        mode = Mode(args.mode) if args.mode else None
        return cmd_step(cfg, mode, args.model, out, trace_out=args.trace_path)
    raise AssertionError(args.command)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    # step writes its trace to --out and the report to stdout (or --report)
    if args.command == "step":
        args.trace_path = args.out
        target = getattr(args, "report", None)
    else:
        target = args.out

    buf = io.StringIO()
    try:
        code = _run(args, buf)
    except DivergenceError as exc:
        sys.stderr.write(f"error: simulation diverged: {exc}\n")
        return EXIT_DIVERGED
    except SettlingUndefinedError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_GATE
    except (ConfigError, DomainError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except BuckBoostError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE

    if target:
        with open(target, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        with contextlib.suppress(BrokenPipeError):
            sys.stdout.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
