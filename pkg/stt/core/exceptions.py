# exceptions.py
from typing import Optional


class SttException(Exception):
    """Base class for estimator and harness exceptions."""
    def __init__(self, exit_code: int, detail: str):
        self.exit_code = exit_code
        self.detail = detail
        super().__init__(self.detail)


class ConfigurationException(SttException):
    def __init__(self, detail: str):
        super().__init__(exit_code=2, detail=detail)


class InsufficientTrialsException(SttException):
    def __init__(self, trials: int, required: int):
        self.trials = trials
        self.required = required
        super().__init__(
            exit_code=2,
            detail=f"Decay-rate check needs at least {required} trials, got {trials}"
        )


class ExportException(SttException):
    def __init__(self, path: str, detail: str):
        self.path = path
        super().__init__(exit_code=2, detail=f"{path}: {detail}")


class GeometryException(SttException):
    """Base class for measurement geometry failures."""
    def __init__(self, detail: str):
        super().__init__(exit_code=1, detail=detail)


class DegenerateGeometryException(GeometryException):
    def __init__(self, distance: float):
        self.distance = distance
        super().__init__(
            detail=f"Target and observer coincide (separation {distance:.3e} m)"
        )


class InvalidBearingException(GeometryException):
    def __init__(self, norm: float):
        self.norm = norm
        super().__init__(detail=f"Bearing is not unit-norm: |g| = {norm:.15f}")


class NumericalDegeneracyException(SttException):
    def __init__(self, detail: str, min_eigenvalue: Optional[float] = None):
        self.min_eigenvalue = min_eigenvalue
        if min_eigenvalue is not None:
            detail = f"{detail} (min eigenvalue {min_eigenvalue:.3e})"
        super().__init__(exit_code=1, detail=detail)


class ObservabilityException(SttException):
    def __init__(self, sigma_min: float, step: int):
        self.sigma_min = sigma_min
        self.step = step
        super().__init__(
            exit_code=1,
            detail=f"Normal matrix is singular at step {step}: sigma_min = {sigma_min:.3e}"
        )
