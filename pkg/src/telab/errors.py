"""Error types shared across the package.

ValidationError maps to CLI exit status 1, NumericalError to status 2.
Falsified regime assertions are reported as data, not exceptions, and
map to status 3 in the CLI.
"""


class ValidationError(ValueError):
    """Input rejected: violated constraint, bad config, unmet precondition."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge or lost reliability."""
