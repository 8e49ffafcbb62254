"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError is a validation failure
(exit 1), everything under NumericalError is a computation failure that
retrying with the same inputs cannot fix (exit 2).
"""


class TrihubError(Exception):
    pass


class ConfigError(TrihubError):
    """Invalid run configuration; the message names the offending field."""


class NumericalError(TrihubError):
    pass


class EigensolverError(NumericalError):
    """The iterative eigensolver did not converge within its iteration cap."""


class DegenerateBlockError(NumericalError):
    """A kept block sector is numerically degenerate; refusing to pick a state."""


class BracketError(NumericalError):
    """Root bracketing failed: no sign change on the given interval."""


class CollapseError(NumericalError):
    """The data-collapse residual is undefined for the given curves or parameters."""
