"""Exception hierarchy shared by every module."""


class NcergError(Exception):
    pass


class ShapeMismatch(NcergError, ValueError):
    pass


class NotSelfAdjoint(NcergError, ValueError):
    pass


class NotPositive(NcergError, ValueError):
    pass


class NotUnitary(NcergError, ValueError):
    pass


class NotInvertible(NcergError, ValueError):
    pass


class NoConvergence(NcergError, RuntimeError):
    pass


class InvalidFunctionSpec(NcergError, ValueError):
    pass


class InvalidP(NcergError, ValueError):
    pass


class TooLarge(NcergError, ValueError):
    pass


class TooManyItems(NcergError, ValueError):
    pass


class EmptyInterval(NcergError, ValueError):
    pass


class LambdaNonpositive(NcergError, ValueError):
    pass


class TraceConditionViolated(NcergError, ValueError):
    pass


class BlockDimMismatch(NcergError, ValueError):
    pass


class OptimizerGapExceeded(NcergError, RuntimeWarning):
    """Issued as a warning: the result is still returned, flagged."""


class ConfigInvalid(NcergError, ValueError):
    pass
