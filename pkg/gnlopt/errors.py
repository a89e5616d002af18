"""Error hierarchy for gnlopt."""

from __future__ import annotations


class GnlError(Exception):
    """Base error for the solver toolkit."""


class ModelError(GnlError, ValueError):
    """Raised when choice-model data is invalid or dimensions disagree."""


class DegenerateNestError(ModelError):
    """Raised when a nest has zero inclusive value where a log or negative power is needed."""


class BetaError(ModelError):
    """Raised when beta does not strictly exceed every revenue."""


class BoundsError(ModelError):
    """Raised when auxiliary variable bounds cannot be formed."""


class CutError(GnlError, ValueError):
    """Raised when a cut family is not applicable at the requested point."""


class NumericalFailureError(GnlError):
    """Raised when the LP kernel cannot recover a usable basis."""


class InfeasibleError(GnlError):
    """Raised when an assortment or pricing problem has no feasible point."""


class UnsupportedConstraintError(GnlError):
    """Raised when price constraints cannot be represented on the price grid."""


class PwlaError(GnlError, ValueError):
    """Raised on invalid piecewise-linear domains or queries."""


class OracleGuardError(GnlError):
    """Raised when a brute-force enumeration exceeds its size guard."""


class InstanceFormatError(GnlError):
    """Raised when an instance file is malformed, truncated or of the wrong kind."""


class ConfigError(GnlError):
    """Raised when solver settings fail validation."""
