"""Error taxonomy shared by the library and the CLI.

The CLI maps DomainError to exit code 1 and ConfigError to exit code 2.
"""


class IcBenchError(Exception):
    """Base class for all icbench errors."""


class DomainError(IcBenchError):
    """Invalid data fed to an otherwise well-configured operation."""


class ConfigError(IcBenchError):
    """Invalid or inconsistent configuration (geometry, spectrum, CLI args)."""
