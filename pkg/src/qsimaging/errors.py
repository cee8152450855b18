"""Exception types raised by the toolkit.

Every domain failure derives from :class:`QSIError`; the command line maps
those to exit code 4.
"""


class QSIError(Exception):
    """Base class for domain errors."""


class DomainError(QSIError, ValueError):
    """Argument outside the mathematical domain of a function."""


class TailTooHeavy(QSIError):
    """Truncated distribution leaves too much probability above n_max."""


class UndefinedG2(QSIError):
    """g2 requested for a distribution with zero mean."""


class EmptyHistogram(QSIError):
    """Histogram with zero shots cannot be turned into probabilities."""


class DegenerateDataset(QSIError):
    """A class is missing from the training split."""


class NoForeground(QSIError):
    """Class map contains only background pixels."""


class FitDiverged(QSIError):
    """Multi-component fit ended worse than the single-component fit."""


class InsufficientSupport(QSIError):
    """Measured distribution does not reach the required photon number."""


class ZeroMean(QSIError):
    """Measured distribution has zero mean photon number."""


class SchemaError(QSIError):
    """Serialized artifact does not match the expected layout."""
