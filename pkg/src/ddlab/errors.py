"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: configuration/validation problems exit
with 2, file-format and I/O problems with 3, numeric failures with 4.
"""


class DdlabError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(DdlabError):
    """Invalid parameters, grids, or preconditions (exit code 2)."""


class ParameterDomainError(ConfigurationError):
    """Distribution or model parameters outside their valid domain."""


class FormatError(DdlabError):
    """Malformed or unreadable data file (exit code 3)."""


class NumericError(DdlabError):
    """Numerical breakdown: singular solves, non-finite results (exit code 4)."""


class FitFailure(NumericError):
    """Maximum-likelihood fit did not converge or the data are degenerate."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
