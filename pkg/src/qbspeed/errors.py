"""
Error hierarchy for the quantum battery speed toolkit.

Every error carries a machine-readable ``code`` and the process ``exit_code``
the command-line front end should return when it escapes an experiment.
"""
from typing import Any, Dict, Optional


class QBSpeedError(Exception):
    """Base class for all toolkit errors."""

    code = 'numerical-failure'
    exit_code = 3

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        body = {
            'error': self.code,
            'message': self.message,
            'exit_code': self.exit_code,
        }
        if self.details:
            body['details'] = self.details
        return body


class InvalidDimensionError(QBSpeedError):
    code = 'invalid-dimension'


class DimensionMismatchError(QBSpeedError):
    code = 'dimension-mismatch'


class InvalidOperatorError(QBSpeedError):
    """Operator or state fails its construction invariant."""
    code = 'invalid-operator'


class NumericalFailureError(QBSpeedError):
    code = 'numerical-failure'


class InvalidSpecError(QBSpeedError):
    code = 'invalid-spec'


class DegenerateBareHamiltonianError(QBSpeedError):
    code = 'degenerate-bare-hamiltonian'


class BoundarySingularityError(QBSpeedError):
    code = 'boundary-singularity'


class MonotonicityViolationError(QBSpeedError):
    code = 'monotonicity-violation'


class OptimizerNotConvergedError(QBSpeedError):
    code = 'optimizer-not-converged'


class EnumerationTooLargeError(QBSpeedError):
    code = 'enumeration-too-large'


class UselessWitnessError(QBSpeedError):
    code = 'useless-witness'


class ConfigError(QBSpeedError):
    code = 'config-parse-error'
    exit_code = 2


class VerificationFailure(QBSpeedError):
    code = 'verification-failure'
    exit_code = 4
