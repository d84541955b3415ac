"""Exception hierarchy shared by all modules."""


class BuckBoostError(Exception):
    pass


class DomainError(BuckBoostError, ValueError):
    """An argument lies outside the domain of the operation."""


class ModeError(BuckBoostError, ValueError):
    """Operation called with an operating point of the wrong mode."""


class ModeAmbiguityError(DomainError):
    """Target voltage falls inside the dead-band around the input voltage.

    Operating there would require the simultaneous buck-boost switching
    state, which this converter avoids because of its losses.
    """


class PoleHitError(BuckBoostError, ZeroDivisionError):
    def __init__(self, omega):
        super().__init__(f"transfer function evaluated at a pole (omega={omega!r} rad/s)")
        self.omega = omega


class NoRootsError(DomainError):
    pass


class DegreeOverflowError(BuckBoostError, ValueError):
    pass


class ConvergenceError(BuckBoostError, RuntimeError):
    pass


class DivergenceError(BuckBoostError, RuntimeError):
    def __init__(self, t, message="simulation state became non-finite"):
        super().__init__(f"{message} at t={t:.9g} s")
        self.t = t


class SettlingUndefinedError(BuckBoostError, ValueError):
    """Output never entered (or never stayed in) the settling band."""
