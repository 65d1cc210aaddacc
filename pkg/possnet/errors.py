"""
Exception types raised across the package.
"""


class PossnetError(Exception):
    """Base class for every error raised on purpose by possnet."""


class ScenarioError(PossnetError, ValueError):
    pass


class PatternError(PossnetError, ValueError):
    pass


class InflationError(PossnetError, ValueError):
    pass


class EncodingError(PossnetError):
    """A solver model does not reproduce the pattern it was built from."""


class LpError(PossnetError):
    pass


class CertificateError(PossnetError):
    pass


class ReportError(PossnetError):
    """Writing reports failed; `written` lists the files already on disk."""

    def __init__(self, message: str, written: list[str]):
        super().__init__(message)
        self.written = written


class DistributionError(PossnetError, ValueError):
    pass


class SolverError(PossnetError):
    """The solver produced a model that violates one of the input clauses."""
