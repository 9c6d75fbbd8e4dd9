"""Exception hierarchy.

Every error raised by the library derives from :class:`TakagiError`; the CLI
maps the concrete classes to exit codes.
"""


class TakagiError(Exception):
    exit_code = 1


class ValidationError(TakagiError, ValueError):
    """Bad parameters, tolerances or ranges."""

    exit_code = 1


class ConstructionError(TakagiError):
    """A level-set stage did not produce the expected platform intervals."""

    exit_code = 2


class PrecisionBudgetError(TakagiError):
    """The requested scale exceeds what double precision can resolve."""

    exit_code = 3
