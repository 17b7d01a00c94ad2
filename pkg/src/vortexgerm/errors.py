"""Exception hierarchy shared by all modules."""


class VortexGermError(Exception):
    """Base class for every error raised by this package."""

    code = "ERROR"


class ConfigError(VortexGermError, ValueError):
    code = "CONFIG_INVALID"


class NumericalError(VortexGermError, RuntimeError):
    """A run produced non-finite values or violated a positivity guard."""

    code = "NUMERICAL_FAILURE"


class DegenerateCurveError(NumericalError):
    code = "DEGENERATE_CURVE"


class OutsideTubeError(NumericalError):
    code = "OUTSIDE_TUBE"


class DerivativeCheckError(NumericalError):
    code = "DERIVATIVE_CHECK"


class SteadyStateError(NumericalError):
    code = "NO_STEADY_CIRCLE"


class TimeMismatchError(VortexGermError, ValueError):
    code = "TIME_MISMATCH"
