"""Design and simulation of the dual-switch non-inverting buck-boost converter."""

from .converter import (
    CircuitParams,
    Conduction,
    Mode,
    OperatingPoint,
    SwitchState,
    ccm_check,
    inductor_ripple,
    load_resistance,
    operating_point,
)
from .ratfun import Polynomial, RationalTransferFunction
from .control import LoopConfig, MarginReport, PerformanceGoals, TypeIIIController

__version__ = "0.1.0"

__all__ = [
    "CircuitParams",
    "Conduction",
    "LoopConfig",
    "MarginReport",
    "Mode",
    "OperatingPoint",
    "PerformanceGoals",
    "Polynomial",
    "RationalTransferFunction",
    "SwitchState",
    "TypeIIIController",
    "ccm_check",
    "inductor_ripple",
    "load_resistance",
    "operating_point",
]
