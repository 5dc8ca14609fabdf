from dataclasses import dataclass, field

import numpy as np
import structlog
from numpy.typing import NDArray

from src.errors import OptimizerConvergenceError
from src.track.curvature import curvature_profile, curvature_triples, heading_profile, menger_curvature_gradient
from src.track.waypoints import AlphaVector, Raceline, TrackCenterline

logger = structlog.get_logger(__name__)


@dataclass
class OptimizerConfig:
    max_iterations: int = 5000
    initial_step: float = 1.0
    max_step: float = 1e3
    backtrack_factor: float = 0.5
    min_step: float = 1e-14
    tolerance: float = 1e-10
    objective_tolerance: float = 1e-13
    v_max: float = 2.0
    a_lat_max: float = 3.0


@dataclass
class OptimizationResult:
    alpha: AlphaVector
    raceline: Raceline
    objective: float
    initial_objective: float
    iterations: int
    history: list[float] = field(default_factory=list)


def track_normals(track: TrackCenterline) -> NDArray[np.float64]:
    """Unit left normals of the centerline."""
    headings = heading_profile(track.centers, track.closed)
    return np.column_stack((-np.sin(headings), np.cos(headings)))


def _objective_weights(n: int, closed: bool) -> NDArray[np.float64]:
    if closed:
        return np.ones(n)
    # Open curves copy the first and last interior curvature onto their endpoints.
    weights = np.ones(n - 2)
    weights[0] += 1.0
    weights[-1] += 1.0
    return weights


def curvature_objective(
    alpha: NDArray[np.float64], track: TrackCenterline, normals: NDArray[np.float64]
) -> float:
    path = track.centers + alpha[:, None] * normals
    kappa = curvature_profile(path, track.closed)
    return float(np.sum(kappa**2))


def curvature_objective_gradient(
    alpha: NDArray[np.float64], track: TrackCenterline, normals: NDArray[np.float64]
) -> tuple[float, NDArray[np.float64]]:
    n = len(track)
    path = track.centers + alpha[:, None] * normals
    p0, p1, p2 = curvature_triples(path, track.closed)
    kappa, g0, g1, g2 = menger_curvature_gradient(p0, p1, p2)
    weights = _objective_weights(n, track.closed)

    value = float(np.sum(weights * kappa**2))
    scale = (2.0 * weights * kappa)[:, None]

    grad_points = np.zeros_like(path)
    if track.closed:
        idx = np.arange(n)
        np.add.at(grad_points, (idx - 1) % n, scale * g0)
        np.add.at(grad_points, idx, scale * g1)
        np.add.at(grad_points, (idx + 1) % n, scale * g2)
    else:
        grad_points[:-2] += scale * g0
        grad_points[1:-1] += scale * g1
        grad_points[2:] += scale * g2

    return value, np.sum(grad_points * normals, axis=1)


def speed_profile(curvature: NDArray[np.float64], v_max: float, a_lat_max: float) -> NDArray[np.float64]:
    magnitude = np.abs(curvature)
    limited = np.sqrt(a_lat_max / np.where(magnitude > 0.0, magnitude, 1.0))
    return np.where(magnitude > 0.0, np.minimum(v_max, limited), v_max)


def raceline_from_path(
    path: NDArray[np.float64], closed: bool, v_max: float, a_lat_max: float
) -> Raceline:
    gamma = curvature_profile(path, closed)
    theta = heading_profile(path, closed)
    v = speed_profile(gamma, v_max, a_lat_max)
    return Raceline(np.column_stack((path, v, theta, gamma)), closed=closed)


def optimize_min_curvature(
    track: TrackCenterline, config: OptimizerConfig | None = None
) -> OptimizationResult:
    config = config or OptimizerConfig()
    normals = track_normals(track)
    lower = -track.half_width_right
    upper = track.half_width_left

    alpha = np.clip(np.zeros(len(track)), lower, upper)
    value, grad = curvature_objective_gradient(alpha, track, normals)
    initial_value = value
    history = [value]
    step = config.initial_step
    converged = False
    iterations = 0

    for iterations in range(1, config.max_iterations + 1):
        projected = np.clip(alpha - grad, lower, upper) - alpha
        if np.max(np.abs(projected)) <= config.tolerance:
            converged = True
            break

        # Backtracking on the projected-gradient sufficient-decrease condition.
        step = min(step * 2.0, config.max_step)
        while True:
            candidate = np.clip(alpha - step * grad, lower, upper)
            delta = candidate - alpha
            cand_value, cand_grad = curvature_objective_gradient(candidate, track, normals)
            bound = value + float(grad @ delta) + float(delta @ delta) / (2.0 * step)
            if cand_value <= bound or step <= config.min_step:
                break
            step *= config.backtrack_factor

        if cand_value >= value:
            # Stalled at machine precision.
            converged = True
            break

        improvement = value - cand_value
        alpha, value, grad = candidate, cand_value, cand_grad
        history.append(value)
        if improvement <= config.objective_tolerance * max(1.0, value):
            converged = True
            break

    if not converged:
        raise OptimizerConvergenceError(AlphaVector(alpha), history)

    logger.info(
        "raceline_optimized",
        iterations=iterations,
        initial_objective=initial_value,
        objective=value,
    )

    path = track.centers + alpha[:, None] * normals
    return OptimizationResult(
        alpha=AlphaVector(alpha),
        raceline=raceline_from_path(path, track.closed, config.v_max, config.a_lat_max),
        objective=value,
        initial_objective=initial_value,
        iterations=iterations,
        history=history,
    )
