"""Exception types mapped to CLI exit codes."""


class AidetectError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ConfigError(AidetectError):
    """Bad configuration, missing paths, or unreadable inputs (exit 2)."""

    exit_code = 2


class DataContractError(AidetectError):
    """Inputs violate a data contract: bad schema, bad ranges, degenerate data (exit 3)."""

    exit_code = 3


class NumericalError(AidetectError):
    """Numerical failure: non-finite values, failed optimization (exit 4)."""

    exit_code = 4
