"""Exception hierarchy.

Two broad families matter to callers: ``InputError`` subclasses mean the
request itself was malformed or the medium is unusable, ``VerificationError``
subclasses mean a numerical check ran and failed.  The CLI maps the first to
exit code 1 and the second to exit code 2.
"""


class PulsefrontError(Exception):
    """Base class for every error raised by the package."""


class InputError(PulsefrontError):
    pass


class NumericalError(PulsefrontError):
    pass


class VerificationError(PulsefrontError):
    """A check ran to completion and its inequality did not hold."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# medium
class EllipticityViolation(InputError):
    pass


class ZeroMismatch(InputError):
    pass


class NotMonostable(InputError):
    pass


class ConfigError(InputError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if field:
            where.append(f"field {field}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line


# spectral
class NoPositiveEigenfunction(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class MonostabilityViolation(InputError):
    pass


class BracketFailure(NumericalError):
    pass


class ProfileTooCoarse(InputError):
    pass


# frontsim
class CFLViolation(InputError):
    pass


class BlowUp(NumericalError):
    pass


class MultipleCrossings(NumericalError):
    pass


class NoCrossing(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SpeedDrift(NumericalError):
    pass


class PeriodicityDefect(NumericalError):
    pass


# asymptotics
class TailUnderflow(NumericalError):
    pass


class NoPlateau(NumericalError):
    pass


class VerificationFailed(VerificationError):
    def __init__(self, message: str, check: str, report=None):
        super().__init__(message, report)
        self.check = check


# envelopes
class ConditionUnsatisfiable(NumericalError):
    pass


class NoAdmissibleLambda(NumericalError):
    pass


class SignViolation(VerificationError):
    def __init__(self, message: str, location=None, report=None):
        super().__init__(message, report)
        self.location = location


class SandwichFailure(VerificationError):
    pass


class SandwichBreach(VerificationError):
    def __init__(self, message: str, t: float, x: float, report=None):
        super().__init__(message, report)
        self.t = t
        self.x = x


class NoShiftConvergence(VerificationError):
    pass


class ProfileMismatch(VerificationError):
    pass
