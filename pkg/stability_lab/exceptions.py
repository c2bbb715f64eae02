# stability_lab/exceptions.py - Error hierarchy shared by the numerics, runner and CLI
from typing import Dict, Optional


class StabilityLabError(Exception):
    """Base error carrying a machine-readable code and details"""
    code = 'stability_lab_error'

    def __init__(self, message: str, details: Optional[Dict] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def as_dict(self) -> Dict:
        return {'error': self.code, 'message': self.message, 'details': self.details}


class UnknownSystem(StabilityLabError):
    code = 'unknown_system'


class ParameterError(StabilityLabError):
    """Missing or invalid gains (details['violations'] lists them)"""
    code = 'invalid_parameters'


class UnsupportedSpaceKind(StabilityLabError):
    code = 'unsupported_space_kind'


class GridTooCoarse(StabilityLabError):
    code = 'grid_too_coarse'


class DimensionMismatch(StabilityLabError):
    code = 'dimension_mismatch'

    def __init__(self, pair: str, expected, actual):
        super().__init__(
            f"Dimension mismatch between {pair}: expected {expected}, got {actual}",
            {'pair': pair, 'expected': expected, 'actual': actual}
        )


class NonFiniteInput(StabilityLabError):
    code = 'nonfinite_input'


class SingularOrIllConditioned(StabilityLabError):
    code = 'singular_or_ill_conditioned'

    def __init__(self, lam: complex, residual: float, reason: str = 'residual'):
        lam = complex(lam)
        super().__init__(
            f"Resolvent solve at lambda={lam} failed ({reason}={residual:.3e})",
            {'lambda_re': lam.real, 'lambda_im': lam.imag, 'reason': reason, 'residual': residual}
        )
        self.lam = lam
        self.residual = residual


class EigenSolverFailure(StabilityLabError):
    code = 'eigensolver_failure'


class GramNotPositiveDefinite(StabilityLabError):
    code = 'gram_not_positive_definite'


class NoDecayDetected(StabilityLabError):
    code = 'no_decay_detected'


class ShiftedBlockUnstable(StabilityLabError):
    code = 'shifted_block_unstable'


class QuadratureError(StabilityLabError):
    code = 'quadrature_error'


class ConfigError(StabilityLabError):
    code = 'config_error'
