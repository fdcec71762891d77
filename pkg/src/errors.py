"""Exception hierarchy shared by every relaycancel module.

Each class carries the ``code`` printed on the CLI's ``ERROR <code>: <detail>``
line and the process ``exit_code`` it maps to.
"""


class RelayCancelError(Exception):
    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


# Validation errors (exit 1) #


class ValidationError(RelayCancelError):
    exit_code = 1


class DimensionMismatch(ValidationError):
    pass


class DomainMismatch(ValidationError):
    pass


class ImproperTransferFunction(ValidationError):
    pass


class ZeroDenominator(ValidationError):
    pass


class NonRepresentableDelay(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class PeriodMismatch(ValidationError):
    pass


class RegularityViolation(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class InvalidProblem(ValidationError):
    pass


# Synthesis outcome (exit 2) #


class Infeasible(RelayCancelError):
    exit_code = 2


# Numerical failures (exit 3) #


class NumericalFailure(RelayCancelError):
    exit_code = 3


class SingularResolvent(NumericalFailure):
    pass


class AlgebraicLoop(NumericalFailure):
    pass


class NoStabilizingSolution(NumericalFailure):
    pass


class IterationDivergence(NumericalFailure):
    pass


class PoleAtMinusOne(NumericalFailure):
    pass


class Unstable(NumericalFailure):
    pass
