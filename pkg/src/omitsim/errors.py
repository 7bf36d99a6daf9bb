"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and the process exit
status the command line front end uses for it.
"""


class OmitError(Exception):
    code = "E_OMIT"
    exit_status = 3


class ValidationError(OmitError, ValueError):
    code = "E_VALIDATION"
    exit_status = 2


class ConfigError(ValidationError):
    code = "E_CONFIG"


class NumericalError(OmitError, ArithmeticError):
    code = "E_NUMERICAL"
    exit_status = 3


class ConvergenceError(NumericalError):
    code = "E_CONVERGENCE"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BistabilityError(NumericalError):
    code = "E_BISTABLE"

    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = tuple(roots)


class PoleProximityError(NumericalError):
    code = "E_POLE_PROXIMITY"


class DegeneratePoleError(NumericalError):
    code = "E_DEGENERATE_POLES"


class ResolutionError(NumericalError):
    code = "E_RESOLUTION"


class UnstableOperatingPointError(NumericalError):
    code = "E_UNSTABLE"


class IntegrationError(NumericalError):
    code = "E_INTEGRATION"

    def __init__(self, message, last_state=None, last_time=None):
        super().__init__(message)
        self.last_state = last_state
        self.last_time = last_time


class WindowError(NumericalError):
    code = "E_WINDOW"


class ThresholdBreach(OmitError):
    code = "E_THRESHOLD"
    exit_status = 4
