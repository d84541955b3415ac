from .engine import SimConfig, controller_realization, simulate_averaged, simulate_switched
from .metrics import StepMetrics, step_metrics
from .pwm import PwmConfig, band_duty, carrier, pwm_states, vctrl_for_duty
from .trace import CSV_HEADER, RefProfile, SimTrace, cycle_average, ripple_pp

__all__ = [
    "CSV_HEADER",
    "PwmConfig",
    "RefProfile",
    "SimConfig",
    "SimTrace",
    "StepMetrics",
    "band_duty",
    "carrier",
    "controller_realization",
    "cycle_average",
    "pwm_states",
    "ripple_pp",
    "simulate_averaged",
    "simulate_switched",
    "step_metrics",
    "vctrl_for_duty",
]
