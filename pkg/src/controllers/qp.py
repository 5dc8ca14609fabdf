"""Operator-splitting solver for convex QPs with equality rows and variable bounds.

    minimize    0.5 x'Px + q'x
    subject to  A_eq x = b_eq,  lb <= x <= ub

Equality and bound rows are stacked into a single constraint matrix ``A`` with interval ``[l, u]`` and the
problem is solved with relaxed ADMM (x, z, y iterates). The linear system of every iteration is the reduced,
positive definite ``P + sigma I + A' diag(rho) A`` and is Cholesky-factored once per penalty value.
"""

from dataclasses import dataclass, field

import numpy as np
import structlog
from numpy.typing import NDArray
from scipy.linalg import cho_factor, cho_solve

from src.errors import DimensionError, QpConvergenceError

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class QpSettings:
    sigma: float = 1e-6
    alpha: float = 1.6
    rho: float = 0.1
    rho_eq_scale: float = 1e3
    rho_min: float = 1e-6
    rho_max: float = 1e6
    eps: float = 1e-6
    max_iter: int = 4000
    adaptive_rho: bool = True
    adaptive_rho_interval: int = 25
    adaptive_rho_tolerance: float = 5.0
    polish: bool = True
    polish_threshold: float = 1e-3


@dataclass
class QpResult:
    x: NDArray[np.float64]
    y: NDArray[np.float64]
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    polished: bool
    objective_history: list[float] = field(default_factory=list)
    residual_history: list[tuple[float, float]] = field(default_factory=list)
    fixed_point_residuals: list[float] = field(default_factory=list)


@dataclass
class _Problem:
    P: NDArray[np.float64]
    q: NDArray[np.float64]
    A: NDArray[np.float64]
    lower: NDArray[np.float64]
    upper: NDArray[np.float64]
    n_eq: int
    box_index: NDArray[np.int64]


def _assemble(
    P: NDArray[np.float64],
    q: NDArray[np.float64],
    A_eq: NDArray[np.float64] | None,
    b_eq: NDArray[np.float64] | None,
    lb: NDArray[np.float64] | None,
    ub: NDArray[np.float64] | None,
) -> _Problem:
    P = np.asarray(P, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64).ravel()
    n = q.size
    if P.shape != (n, n):
        raise DimensionError("P", (n, n), P.shape)
    P = 0.5 * (P + P.T)

    if A_eq is None:
        A_eq = np.zeros((0, n))
        b_eq = np.zeros(0)
    A_eq = np.atleast_2d(np.asarray(A_eq, dtype=np.float64))
    b_eq = np.asarray(b_eq, dtype=np.float64).ravel()
    if A_eq.shape[1] != n:
        raise DimensionError("A_eq columns", n, A_eq.shape[1])
    if b_eq.size != A_eq.shape[0]:
        raise DimensionError("b_eq", A_eq.shape[0], b_eq.size)

    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=np.float64).ravel()
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=np.float64).ravel()
    if lb.size != n or ub.size != n:
        raise DimensionError("bounds", n, (lb.size, ub.size))
    if np.any(lb > ub):
        raise ValueError("lower bounds must not exceed upper bounds")

    # Only variables with at least one finite bound get a constraint row.
    box_index = np.flatnonzero(np.isfinite(lb) | np.isfinite(ub))
    box_rows = np.eye(n)[box_index]
    return _Problem(
        P=P,
        q=q,
        A=np.vstack((A_eq, box_rows)),
        lower=np.concatenate((b_eq, lb[box_index])),
        upper=np.concatenate((b_eq, ub[box_index])),
        n_eq=A_eq.shape[0],
        box_index=box_index,
    )


def _rho_vector(problem: _Problem, rho: float, settings: QpSettings) -> NDArray[np.float64]:
    rho_vec = np.full(problem.A.shape[0], rho)
    rho_vec[: problem.n_eq] = rho * settings.rho_eq_scale
    return np.clip(rho_vec, settings.rho_min, settings.rho_max * settings.rho_eq_scale)


def _factor(problem: _Problem, rho_vec: NDArray[np.float64], sigma: float) -> tuple:
    n = problem.q.size
    K = problem.P + sigma * np.eye(n) + problem.A.T @ (rho_vec[:, None] * problem.A)
    return cho_factor(K)


def _objective(problem: _Problem, x: NDArray[np.float64]) -> float:
    return float(0.5 * x @ problem.P @ x + problem.q @ x)


def _residuals(
    problem: _Problem, x: NDArray[np.float64], z: NDArray[np.float64], y: NDArray[np.float64]
) -> tuple[float, float]:
    Ax = problem.A @ x
    primal = float(np.max(np.abs(Ax - z), initial=0.0))
    dual = float(np.max(np.abs(problem.P @ x + problem.q + problem.A.T @ y), initial=0.0))
    return primal, dual


def _polish(
    problem: _Problem, z: NDArray[np.float64], y: NDArray[np.float64], eps: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]] | None:
    """Solve the equality-constrained QP on the guessed active set; None when the guess is not optimal."""
    n = problem.q.size
    m = problem.A.shape[0]
    is_eq = np.zeros(m, dtype=bool)
    is_eq[: problem.n_eq] = True
    lower_active = is_eq | (z - problem.lower < -y)
    upper_active = ~lower_active & (problem.upper - z < y)
    active = lower_active | upper_active
    target = np.where(upper_active, problem.upper, problem.lower)[active]

    A_act = problem.A[active]
    k = A_act.shape[0]
    kkt = np.block([[problem.P, A_act.T], [A_act, np.zeros((k, k))]])
    rhs = np.concatenate((-problem.q, target))
    solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    x = solution[:n]
    y_polished = np.zeros(m)
    y_polished[active] = solution[n:]

    Ax = problem.A @ x
    violation = max(
        float(np.max(problem.lower - Ax, initial=0.0)),
        float(np.max(Ax - problem.upper, initial=0.0)),
    )
    box = ~is_eq
    wrong_sign = max(
        float(np.max(y_polished[box & lower_active], initial=0.0)),
        float(np.max(-y_polished[box & upper_active], initial=0.0)),
    )
    stationarity = float(np.max(np.abs(problem.P @ x + problem.q + problem.A.T @ y_polished), initial=0.0))
    if violation > eps or wrong_sign > eps or stationarity > eps:
        return None
    return x, y_polished


def qp_solve(
    P: NDArray[np.float64],
    q: NDArray[np.float64],
    A_eq: NDArray[np.float64] | None = None,
    b_eq: NDArray[np.float64] | None = None,
    lb: NDArray[np.float64] | None = None,
    ub: NDArray[np.float64] | None = None,
    settings: QpSettings | None = None,
    warm_start: tuple[NDArray[np.float64], NDArray[np.float64]] | None = None,
) -> QpResult:
    settings = settings or QpSettings()
    problem = _assemble(P, q, A_eq, b_eq, lb, ub)
    n = problem.q.size
    m = problem.A.shape[0]

    if warm_start is not None and warm_start[0].shape == (n,) and warm_start[1].shape == (m,):
        x = warm_start[0].astype(np.float64, copy=True)
        y = warm_start[1].astype(np.float64, copy=True)
    else:
        x = np.zeros(n)
        y = np.zeros(m)
    z = np.clip(problem.A @ x, problem.lower, problem.upper)

    rho = settings.rho
    rho_vec = _rho_vector(problem, rho, settings)
    factor = _factor(problem, rho_vec, settings.sigma)
    alpha = settings.alpha

    objective_history: list[float] = []
    residual_history: list[tuple[float, float]] = []
    fixed_point: list[float] = []

    for iteration in range(1, settings.max_iter + 1):
        rhs = settings.sigma * x - problem.q + problem.A.T @ (rho_vec * z - y)
        x_tilde = cho_solve(factor, rhs)
        z_tilde = problem.A @ x_tilde

        x_next = alpha * x_tilde + (1.0 - alpha) * x
        z_relaxed = alpha * z_tilde + (1.0 - alpha) * z
        z_next = np.clip(z_relaxed + y / rho_vec, problem.lower, problem.upper)
        y_next = y + rho_vec * (z_relaxed - z_next)

        dx = x_next - x
        dv = (z_next + y_next / rho_vec) - (z + y / rho_vec)
        fixed_point.append(float(np.sqrt(settings.sigma * dx @ dx + np.sum(rho_vec * dv * dv))))
        x, z, y = x_next, z_next, y_next

        primal, dual = _residuals(problem, x, z, y)
        residual_history.append((primal, dual))
        objective_history.append(_objective(problem, x))

        if primal <= settings.eps and dual <= settings.eps:
            return _finish(problem, x, y, iteration, settings, objective_history, residual_history, fixed_point)

        at_check = iteration % settings.adaptive_rho_interval == 0
        if at_check and settings.polish and max(primal, dual) <= settings.polish_threshold:
            polished = _polish(problem, z, y, settings.eps)
            if polished is not None:
                return _result(
                    problem, polished[0], polished[1], iteration, True, objective_history, residual_history, fixed_point
                )

        if at_check and settings.adaptive_rho:
            rho_new = _adapted_rho(problem, x, z, y, rho, primal, dual, settings)
            if rho_new is not None:
                rho = rho_new
                rho_vec = _rho_vector(problem, rho, settings)
                factor = _factor(problem, rho_vec, settings.sigma)

    logger.warning("qp_not_converged", iterations=settings.max_iter, residuals=residual_history[-1])
    raise QpConvergenceError(np.clip(x, *_variable_bounds(problem, n)), residual_history)


def _adapted_rho(
    problem: _Problem,
    x: NDArray[np.float64],
    z: NDArray[np.float64],
    y: NDArray[np.float64],
    rho: float,
    primal: float,
    dual: float,
    settings: QpSettings,
) -> float | None:
    tiny = 1e-12
    primal_scale = max(float(np.max(np.abs(problem.A @ x), initial=0.0)), float(np.max(np.abs(z), initial=0.0)), tiny)
    dual_scale = max(
        float(np.max(np.abs(problem.P @ x), initial=0.0)),
        float(np.max(np.abs(problem.A.T @ y), initial=0.0)),
        float(np.max(np.abs(problem.q), initial=0.0)),
        tiny,
    )
    ratio = (primal / primal_scale) / max(dual / dual_scale, tiny)
    rho_new = float(np.clip(rho * np.sqrt(ratio), settings.rho_min, settings.rho_max))
    tol = settings.adaptive_rho_tolerance
    if rho_new > rho * tol or rho_new < rho / tol:
        return rho_new
    return None


def _variable_bounds(problem: _Problem, n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[problem.box_index] = problem.lower[problem.n_eq :]
    ub[problem.box_index] = problem.upper[problem.n_eq :]
    return lb, ub


def _finish(
    problem: _Problem,
    x: NDArray[np.float64],
    y: NDArray[np.float64],
    iterations: int,
    settings: QpSettings,
    objective_history: list[float],
    residual_history: list[tuple[float, float]],
    fixed_point: list[float],
) -> QpResult:
    if settings.polish:
        z = np.clip(problem.A @ x, problem.lower, problem.upper)
        polished = _polish(problem, z, y, settings.eps)
        if polished is not None:
            return _result(problem, *polished, iterations, True, objective_history, residual_history, fixed_point)
    return _result(problem, x, y, iterations, False, objective_history, residual_history, fixed_point)


def _result(
    problem: _Problem,
    x: NDArray[np.float64],
    y: NDArray[np.float64],
    iterations: int,
    polished: bool,
    objective_history: list[float],
    residual_history: list[tuple[float, float]],
    fixed_point: list[float],
) -> QpResult:
    n = problem.q.size
    x = np.clip(x, *_variable_bounds(problem, n))
    z = np.clip(problem.A @ x, problem.lower, problem.upper)
    primal, dual = _residuals(problem, x, z, y)
    logger.debug("qp_solved", iterations=iterations, polished=polished, primal=primal, dual=dual)
    return QpResult(
        x=x,
        y=y,
        objective=_objective(problem, x),
        iterations=iterations,
        primal_residual=primal,
        dual_residual=dual,
        polished=polished,
        objective_history=objective_history,
        residual_history=residual_history,
        fixed_point_residuals=fixed_point,
    )
