"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation-type failures (bad
parameters, malformed files, broken invariants) exit with 2, plain I/O
failures with 1.
"""


class MixmoodError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MixmoodError):
    """Input violates a documented invariant or parameter bound."""


class FormatError(ValidationError):
    """A file does not conform to its declared on-disk format."""


class ExtractorError(ValidationError):
    """A feature extractor cannot be applied to the given input."""


class TrainingError(MixmoodError):
    """Training diverged or otherwise failed mid-run."""
