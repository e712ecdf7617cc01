"""Exception types shared across the package."""


class StringModelError(Exception):
    """Base class for all errors raised by this package."""


class InadmissibleParams(StringModelError):
    """Physical parameters outside the admissible regime."""


class DimensionTooSmall(StringModelError):
    """Grid too coarse for the requested operators."""


class TooManyModes(StringModelError):
    """More longitudinal modes requested than the grid can carry."""


class DegenerateStretch(StringModelError):
    """Local stretch collapsed to zero; model invalid there."""


class SingularUpdate(StringModelError):
    """Update-matrix factorisation failed."""


class SolveFailure(StringModelError):
    """Linear solve of the update system failed."""


class NonFiniteState(StringModelError):
    """NaN or Inf detected in the state vectors."""


class ContactAtBoundary(StringModelError):
    """Source contact point too close to a fixed end."""


class ThetaOutOfRange(StringModelError):
    """theta_u outside the admissible half-open range."""


class ThetaVOutOfRange(StringModelError):
    """theta_v incompatible with a positive mode bound."""


class UnstableConfiguration(StringModelError):
    """Grid/time-step pair violates the stability condition."""


class BracketFailure(StringModelError):
    """1-D minimisation could not bracket a minimum."""


class OddN(StringModelError):
    """Convergence studies require an even number of subintervals."""


class ParameterOutOfRange(StringModelError):
    """Scalar argument outside the supported domain."""


class ZeroInitialEnergy(StringModelError):
    """Energy-error series undefined for a run starting at zero energy."""


class ParseError(StringModelError):
    """Malformed configuration file."""


class UnknownKey(ParseError):
    """Configuration key not recognised."""


class MissingKey(ParseError):
    """Required configuration key absent."""


class UnitError(ParseError):
    """Missing or unsupported unit suffix on a configuration value."""
