"""
Exception hierarchy for the gluing simulator.

Everything raised on purpose derives from GluingError so the CLI can map
failures to exit codes in one place.
"""


class GluingError(Exception):
    """Base class for all simulator errors."""


class IncompatibleCarrierError(GluingError):
    """Two permutations act on different dart sets."""


class UnmatchableDartError(GluingError):
    """A perfect matching was requested on an odd number of darts."""


class InvalidModelParamsError(GluingError, ValueError):
    """Model parameters violate the model's size constraints."""


class ShortcutInapplicableError(GluingError):
    """The γ shortcut was asked for on an unprimed model with boundary."""


class EnumerationGuardError(GluingError):
    """An exhaustive enumeration would exceed its configured size guard."""


class UndefinedNormalizationError(GluingError):
    """Normalization needs m >= 2 and n >= 3."""


class UnsupportedModelError(GluingError):
    """The operation is only defined for some model kinds."""


class CategoryMismatchError(GluingError):
    """Observed and expected tables do not share a category set."""


class InvariantViolation(AssertionError):
    """An internal consistency check failed. Never expected."""
