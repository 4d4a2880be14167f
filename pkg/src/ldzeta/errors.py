"""Exception types shared across the package.

Each carries the CLI exit code it maps to, so the command layer can translate
failures without inspecting messages.
"""


class LdzetaError(Exception):
    exit_code = 1


class ConfigError(LdzetaError, ValueError):
    exit_code = 2


class DomainError(ConfigError):
    """A quantity was requested outside the range where it is defined."""


class InfeasibleError(LdzetaError):
    exit_code = 3


class BudgetError(LdzetaError):
    exit_code = 4


class PrecisionError(LdzetaError):
    """Extended precision was not enough to resolve a cancelling sum."""

    exit_code = 4
