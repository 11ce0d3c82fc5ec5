"""Exception types shared across the package."""


class LhyLabError(Exception):
    """Base class for all package errors."""


class GridResolutionError(LhyLabError):
    """A quadrature grid cannot resolve the requested integrand."""


class SpaceMismatchError(LhyLabError):
    """Profiles tagged with incompatible position/momentum spaces."""


class NonFiniteValueError(LhyLabError):
    """An evaluator returned a non-finite value."""


class BlockMarginError(LhyLabError):
    """A mode block is too small for the requested discrete-derivative order."""


class DiluteRegimeError(LhyLabError):
    """Parameters fall outside the dilute regime the formulas assume."""


class CalibrationError(LhyLabError):
    """An internal calibration (normalization, root find) did not converge."""


class QuadratureError(LhyLabError):
    """An adaptive quadrature failed to converge or detected divergence."""


class TailBudgetError(LhyLabError):
    """A truncated Fock-space construction exceeds its tail-mass budget."""


class BasisCapError(LhyLabError):
    """Requested Fock basis exceeds the configured dimension cap."""


class ConfigError(LhyLabError):
    """Invalid run configuration; carries the offending key."""

    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"config key '{key}': {reason}")
