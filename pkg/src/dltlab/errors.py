"""Exception types shared across the laboratory."""


class DltlabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DltlabError):
    """A config file, type combination, or parameter set is invalid.

    The CLI maps this to exit code 2.
    """


class UnsupportedSystemError(ConfigurationError):
    """An operation was asked of a system kind that cannot support it."""


class DomainError(DltlabError):
    """An argument is outside an operation's stated domain."""


class OverflowGuardError(DltlabError):
    """An exact or floating computation would exceed its overflow guard."""


class NonGenericIETError(DltlabError):
    """Rauzy-Veech induction hit a tie or a reducible permutation."""


class DiagnosticError(DltlabError):
    """A numerical diagnostic failed hard (CLI exit code 3)."""
