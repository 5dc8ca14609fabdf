from pathlib import Path
from typing import Any


class PlannerError(Exception):
    pass


class TrackFormatError(PlannerError):
    def __init__(self, path: Path | str, message: str, line: int | None = None):
        self.path = str(path)
        self.line = line
        location = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{location}: {message}")


class TrackValidationError(PlannerError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class OptimizerConvergenceError(PlannerError):
    def __init__(self, alpha: Any, history: list[float]):
        self.alpha = alpha
        self.history = history
        last = history[-1] if history else float("nan")
        super().__init__(f"Raceline optimizer did not converge after {len(history)} iterations (objective {last:.6g})")


class ObstaclePlacementError(PlannerError):
    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"obstacle {index}: {message}")


class ConfigurationError(PlannerError):
    def __init__(self, message: str, fields: list[str] | None = None):
        self.fields = fields or []
        if self.fields:
            message = f"{message} [{', '.join(self.fields)}]"
        super().__init__(message)


class QpConvergenceError(PlannerError):
    def __init__(self, x: Any, residual_history: list[tuple[float, float]]):
        self.x = x
        self.residual_history = residual_history
        prim, dual = residual_history[-1] if residual_history else (float("nan"), float("nan"))
        super().__init__(
            f"QP did not converge after {len(residual_history)} iterations "
            f"(primal residual {prim:.3g}, dual residual {dual:.3g})"
        )


class MpcInfeasibleError(PlannerError):
    def __init__(self, constraint: str, value: float, lower: float, upper: float):
        self.constraint = constraint
        super().__init__(f"MPC infeasible: {constraint}={value:.6g} outside [{lower:.6g}, {upper:.6g}]")


class DimensionError(PlannerError):
    def __init__(self, what: str, expected: Any, found: Any):
        self.expected = expected
        self.found = found
        super().__init__(f"{what}: expected {expected}, found {found}")


class CheckpointError(PlannerError):
    pass


class NonFiniteLossError(PlannerError):
    def __init__(self, snapshot: dict[str, Any]):
        self.snapshot = snapshot
        super().__init__(f"Non-finite loss encountered: {snapshot}")
