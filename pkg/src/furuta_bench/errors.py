"""Exception types raised across the package."""

from __future__ import annotations


class FurutaError(Exception):
    pass


class ParameterError(FurutaError, ValueError):
    """Physically invalid or unreadable pendulum parameters."""


class IntegrationBlowup(FurutaError, ArithmeticError):
    """Integration produced a non-finite state."""

    def __init__(self, state):
        super().__init__(f"integration produced a non-finite state: {tuple(state)}")
        self.state = state


class CalibrationError(FurutaError):
    def __init__(self, residuals: dict):
        worst = ", ".join(f"{k}={v:.3%}" for k, v in residuals.items())
        super().__init__(f"calibration missed the tolerance; best relative errors: {worst}")
        self.residuals = residuals


class CareError(FurutaError, ArithmeticError):
    """The Riccati solver did not reach a stabilizing solution."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class RootFindingError(FurutaError, ArithmeticError):
    pass


class DegenerateEncodingError(FurutaError, ValueError):
    pass


class ConfigError(FurutaError, ValueError):
    pass
