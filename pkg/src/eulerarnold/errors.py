"""Exception hierarchy.

``ConfigError`` subclasses map to CLI exit status 2, ``NumericalError``
subclasses to exit status 3.
"""


class EulerArnoldError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(EulerArnoldError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None, field=None):
        super().__init__(message)
        self.line = line
        self.field = field


class ValidationError(ConfigError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalError(EulerArnoldError):
    pass


class KernelContamination(NumericalError):
    """Momentum has weight on modes annihilated by the inertia operator."""


class ResonantModes(NumericalError):
    """A field handed to the restricted Helmholtz inverse has modes |n| <= 1."""


class NonFiniteState(NumericalError):
    pass


class DegenerateSlope(NumericalError):
    pass


class InconclusiveResolution(NumericalError):
    """Tail energy tripped before any steepening trend: under-resolution, not breaking."""


class BoundViolated(NumericalError):
    pass


class CertificateFailed(NumericalError):
    pass


class SlopeCollapse(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class HolomorphyViolation(NumericalError):
    pass


class DegenerateScale(NumericalError):
    pass


class OrderMismatch(NumericalError):
    pass


class EmptySeries(NumericalError):
    pass
