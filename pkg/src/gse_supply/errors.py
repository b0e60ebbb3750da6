"""Exception hierarchy. CLI exit codes hang off the three top-level groups."""


class GseError(Exception):
    exit_code = 1


class ConfigError(GseError):
    exit_code = 2


class DataError(GseError):
    exit_code = 3


class SolverError(GseError):
    exit_code = 4


class ParameterDomainError(ConfigError, ValueError):
    pass


class InputError(DataError, ValueError):
    pass


class InconsistencyError(DataError, ValueError):
    """Supply/use tables that cannot be normalized."""


class ConcordanceError(DataError, KeyError):
    pass


class NonProductiveError(DataError, ValueError):
    """Spectral radius of the product coefficients is >= 1."""
