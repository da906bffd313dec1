"""
Utilities shared by the solvers and the CLI: the exception hierarchy,
configuration loading and logging setup.
"""

from src.utils.exceptions import (
    CheckFailure,
    ConfigError,
    ContractError,
    InconsistentSeed,
    IntegrationBlowUp,
    NoConvergence,
    NumericDomainError,
    RangeError,
    SingularKkt,
    VakonomicError,
)

__all__ = [
    'CheckFailure', 'ConfigError', 'ContractError', 'InconsistentSeed', 'IntegrationBlowUp',
    'NoConvergence', 'NumericDomainError', 'RangeError', 'SingularKkt', 'VakonomicError',
]
