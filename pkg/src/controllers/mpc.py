"""Linear time-varying MPC for the kinematic single-track model.

State ``z = [x, y, v, theta]``, input ``u = [a, delta]``. The model is linearized about every stage of the
reference and the resulting QP is handed to :func:`src.controllers.qp.qp_solve`.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import structlog
from numpy.typing import NDArray
from scipy.linalg import block_diag

from src.controllers.base import BaseController
from src.controllers.qp import QpResult, QpSettings, qp_solve
from src.errors import ConfigurationError, DimensionError, MpcInfeasibleError, QpConvergenceError
from src.geometry import wrap_angle
from src.sim.state import Action, VehicleParams, VehicleState
from src.track.curvature import curvature_profile

logger = structlog.get_logger(__name__)

NX = 4
NU = 2
STATE_NAMES = ("x", "y", "v", "theta")
INF = math.inf


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 10
    dt: float = 0.1
    q_step: tuple[float, float, float, float] = (10.0, 10.0, 1.0, 1.0)
    q_final: tuple[float, float, float, float] = (20.0, 20.0, 2.0, 2.0)
    r_step: tuple[float, float] = (0.1, 0.5)
    r_diff: tuple[float, float] = (0.1, 1.0)
    state_lower: tuple[float, float, float, float] = (-INF, -INF, 0.0, -INF)
    state_upper: tuple[float, float, float, float] = (INF, INF, 2.0, INF)
    input_lower: tuple[float, float] = (-3.0, -0.4189)
    input_upper: tuple[float, float] = (3.0, 0.4189)
    input_rate_lower: tuple[float, float] = (-INF, -0.32)
    input_rate_upper: tuple[float, float] = (INF, 0.32)
    # False applies the literal u' R_d u form instead of penalizing input differences.
    difference_penalty: bool = True
    speed: float | None = None

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be at least 1, got {self.horizon}", fields=["horizon"])
        if self.dt <= 0.0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}", fields=["dt"])
        for name in ("q_step", "q_final", "r_step", "r_diff"):
            if any(w < 0.0 for w in getattr(self, name)):
                raise ConfigurationError("weights must be non-negative", fields=[name])
        for lower, upper in (
            ("state_lower", "state_upper"),
            ("input_lower", "input_upper"),
            ("input_rate_lower", "input_rate_upper"),
        ):
            if any(lo > hi for lo, hi in zip(getattr(self, lower), getattr(self, upper))):
                raise ConfigurationError("bounds must satisfy min <= max", fields=[lower, upper])

    @classmethod
    def from_params(
        cls,
        params: VehicleParams,
        horizon: int = 10,
        dt: float = 0.1,
        q_step: tuple[float, float, float, float] = (10.0, 10.0, 1.0, 1.0),
        **overrides: Any,
    ) -> "MpcConfig":
        """Bounds taken from the vehicle; the terminal weight defaults to twice the stage weight."""
        base = cls(
            horizon=horizon,
            dt=dt,
            q_step=q_step,
            q_final=(2.0 * q_step[0], 2.0 * q_step[1], 2.0 * q_step[2], 2.0 * q_step[3]),
            state_upper=(INF, INF, params.v_max, INF),
            input_lower=(-params.a_max, -params.delta_max),
            input_upper=(params.a_max, params.delta_max),
            input_rate_lower=(-INF, -params.steer_rate_max * dt),
            input_rate_upper=(INF, params.steer_rate_max * dt),
        )
        return replace(base, **overrides)


@dataclass
class MpcSolution:
    states: NDArray[np.float64]
    inputs: NDArray[np.float64]
    objective: float
    iterations: int
    dynamics_residual: float
    bound_violation: float
    converged: bool = True
    qp: QpResult | None = field(default=None, repr=False)

    @property
    def first_input(self) -> NDArray[np.float64]:
        return self.inputs[0]


def _model(z: NDArray[np.float64], u: NDArray[np.float64], wheelbase: float) -> NDArray[np.float64]:
    _, _, v, theta = z
    _, delta = u
    return np.array([v * math.cos(theta), v * math.sin(theta), u[0], v * math.tan(delta) / wheelbase])


def model_jacobians(
    z: NDArray[np.float64], u: NDArray[np.float64], wheelbase: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    _, _, v, theta = z
    _, delta = u
    jz = np.zeros((NX, NX))
    jz[0, 2] = math.cos(theta)
    jz[0, 3] = -v * math.sin(theta)
    jz[1, 2] = math.sin(theta)
    jz[1, 3] = v * math.cos(theta)
    jz[3, 2] = math.tan(delta) / wheelbase
    ju = np.zeros((NX, NU))
    ju[2, 0] = 1.0
    ju[3, 1] = v / (wheelbase * math.cos(delta) ** 2)
    return jz, ju


def linearize_dynamics(
    ref_state: NDArray[np.float64], ref_input: NDArray[np.float64], params: VehicleParams, dt: float
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Discrete model ``z+ = A z + B u + C`` from a forward-Euler step of the first-order expansion."""
    z_r = np.asarray(ref_state, dtype=np.float64)
    u_r = np.asarray(ref_input, dtype=np.float64)
    jz, ju = model_jacobians(z_r, u_r, params.wheelbase)
    A = np.eye(NX) + dt * jz
    B = dt * ju
    C = dt * (_model(z_r, u_r, params.wheelbase) - jz @ z_r - ju @ u_r)
    return A, B, C


@dataclass
class _Layout:
    horizon: int

    @property
    def n_states(self) -> int:
        return NX * (self.horizon + 1)

    @property
    def n_inputs(self) -> int:
        return NU * self.horizon

    @property
    def n_diffs(self) -> int:
        return NU * (self.horizon - 1)

    @property
    def size(self) -> int:
        return self.n_states + self.n_inputs + self.n_diffs

    def z(self, t: int) -> slice:
        return slice(NX * t, NX * (t + 1))

    def u(self, t: int) -> slice:
        start = self.n_states + NU * t
        return slice(start, start + NU)

    def d(self, t: int) -> slice:
        start = self.n_states + self.n_inputs + NU * t
        return slice(start, start + NU)


def _unwrap_reference(theta_current: float, thetas: NDArray[np.float64]) -> NDArray[np.float64]:
    out = np.empty_like(thetas)
    previous = theta_current
    for i, theta in enumerate(thetas):
        previous = previous + wrap_angle(float(theta) - previous)
        out[i] = previous
    return out


def _check_initial_state(z0: NDArray[np.float64], cfg: MpcConfig) -> None:
    for i, name in enumerate(STATE_NAMES):
        lower, upper = cfg.state_lower[i], cfg.state_upper[i]
        if not lower - 1e-9 <= z0[i] <= upper + 1e-9:
            raise MpcInfeasibleError(name, float(z0[i]), lower, upper)


def solve_mpc(
    state: VehicleState,
    ref_states: NDArray[np.float64],
    ref_inputs: NDArray[np.float64],
    cfg: MpcConfig,
    params: VehicleParams,
    qp_settings: QpSettings | None = None,
    warm_start: tuple[NDArray[np.float64], NDArray[np.float64]] | None = None,
) -> MpcSolution:
    H = cfg.horizon
    ref_states = np.array(ref_states, dtype=np.float64)
    ref_inputs = np.asarray(ref_inputs, dtype=np.float64)
    if ref_states.shape != (H + 1, NX):
        raise DimensionError("reference states", (H + 1, NX), ref_states.shape)
    if ref_inputs.shape not in ((H, NU), (H + 1, NU)):
        raise DimensionError("reference inputs", (H + 1, NU), ref_inputs.shape)

    z0 = state.as_vector()
    _check_initial_state(z0, cfg)
    ref_states[:, 3] = _unwrap_reference(state.theta, ref_states[:, 3])

    layout = _Layout(H)
    n = layout.size

    # P = 2W and q = -2W w_ref for the weighted tracking terms.
    q_step, q_final = np.diag(cfg.q_step), np.diag(cfg.q_final)
    r_step, r_diff = np.diag(cfg.r_step), np.diag(cfg.r_diff)
    if cfg.difference_penalty:
        blocks = [q_step] * H + [q_final] + [r_step] * H + [r_diff] * (H - 1)
    else:
        blocks = [q_step] * H + [q_final] + [r_step + r_diff] * H + [np.zeros((NU, NU))] * (H - 1)
    P = 2.0 * block_diag(*blocks)
    q = np.zeros(n)
    for t in range(H + 1):
        q[layout.z(t)] = -2.0 * (q_final if t == H else q_step) @ ref_states[t]
    for t in range(H):
        q[layout.u(t)] = -2.0 * r_step @ ref_inputs[t]

    # Equalities: initial state, linearized dynamics, input differences.
    n_eq = NX + NX * H + NU * (H - 1)
    A_eq = np.zeros((n_eq, n))
    b_eq = np.zeros(n_eq)
    A_eq[:NX, layout.z(0)] = np.eye(NX)
    b_eq[:NX] = z0
    models = []
    row = NX
    for t in range(H):
        A, B, C = linearize_dynamics(ref_states[t], ref_inputs[t], params, cfg.dt)
        models.append((A, B, C))
        A_eq[row : row + NX, layout.z(t + 1)] = np.eye(NX)
        A_eq[row : row + NX, layout.z(t)] = -A
        A_eq[row : row + NX, layout.u(t)] = -B
        b_eq[row : row + NX] = C
        row += NX
    for t in range(H - 1):
        A_eq[row : row + NU, layout.d(t)] = np.eye(NU)
        A_eq[row : row + NU, layout.u(t + 1)] = -np.eye(NU)
        A_eq[row : row + NU, layout.u(t)] = np.eye(NU)
        row += NU

    lb = np.concatenate(
        [np.tile(cfg.state_lower, H + 1), np.tile(cfg.input_lower, H), np.tile(cfg.input_rate_lower, H - 1)]
    )
    ub = np.concatenate(
        [np.tile(cfg.state_upper, H + 1), np.tile(cfg.input_upper, H), np.tile(cfg.input_rate_upper, H - 1)]
    )
    # The first step also respects the steering slew from the current wheel angle.
    first_delta = layout.u(0).start + 1
    lb[first_delta] = max(lb[first_delta], state.delta + cfg.input_rate_lower[1])
    ub[first_delta] = min(ub[first_delta], state.delta + cfg.input_rate_upper[1])
    if lb[first_delta] > ub[first_delta]:
        lb[first_delta] = ub[first_delta] = float(np.clip(state.delta, cfg.input_lower[1], cfg.input_upper[1]))
    # z_0 is pinned by the equality rows.
    lb[layout.z(0)] = -INF
    ub[layout.z(0)] = INF

    result = qp_solve(P, q, A_eq, b_eq, lb, ub, settings=qp_settings, warm_start=warm_start)
    x = result.x
    states = x[: layout.n_states].reshape(H + 1, NX).copy()
    inputs = x[layout.n_states : layout.n_states + layout.n_inputs].reshape(H, NU).copy()
    residual = 0.0
    for t, (A, B, C) in enumerate(models):
        residual = max(residual, float(np.max(np.abs(states[t + 1] - (A @ states[t] + B @ inputs[t] + C)))))
    violation = max(float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
    return MpcSolution(
        states=states,
        inputs=inputs,
        objective=mpc_objective(states, inputs, ref_states, ref_inputs, cfg),
        iterations=result.iterations,
        dynamics_residual=residual,
        bound_violation=violation,
        qp=result,
    )


def mpc_objective(
    states: NDArray[np.float64],
    inputs: NDArray[np.float64],
    ref_states: NDArray[np.float64],
    ref_inputs: NDArray[np.float64],
    cfg: MpcConfig,
) -> float:
    """Stage and terminal state tracking, input tracking and the input-difference (or literal) penalty."""
    H = cfg.horizon
    dz = states - ref_states
    du = inputs - ref_inputs[:H]
    cost = float(np.sum(dz[:H] ** 2 * np.asarray(cfg.q_step)))
    cost += float(np.sum(dz[H] ** 2 * np.asarray(cfg.q_final)))
    cost += float(np.sum(du**2 * np.asarray(cfg.r_step)))
    if cfg.difference_penalty:
        cost += float(np.sum(np.diff(inputs, axis=0) ** 2 * np.asarray(cfg.r_diff)))
    else:
        cost += float(np.sum(inputs**2 * np.asarray(cfg.r_diff)))
    return cost


def reference_from_trajectory(
    state: VehicleState,
    trajectory: NDArray[np.float64],
    speed: float,
    cfg: MpcConfig,
    params: VehicleParams,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Stage references sampled along the trajectory at ``speed`` from the vehicle's projection onto it."""
    points = np.asarray(trajectory, dtype=np.float64)
    if points.shape[0] < 2:
        raise DimensionError("trajectory", "at least 2 points", points.shape[0])
    seg = np.diff(points, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    keep = np.concatenate(([True], seg_len > 1e-9))
    points = points[keep]
    H = cfg.horizon
    if points.shape[0] < 2:
        # The horizon collapsed onto one point (end of an open raceline): carry on along the current heading.
        direction = np.array([math.cos(state.theta), math.sin(state.theta)])
        travel = speed * cfg.dt * np.arange(H + 1)
        ref_states = np.column_stack(
            (
                points[0, 0] + travel * direction[0],
                points[0, 1] + travel * direction[1],
                np.full(H + 1, speed),
                np.full(H + 1, state.theta),
            )
        )
        return ref_states, np.zeros((H + 1, NU))
    seg = np.diff(points, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    arc = np.concatenate(([0.0], np.cumsum(seg_len)))

    # Arc coordinate of the vehicle's projection onto the polyline.
    rel = state.position - points[:-1]
    t = np.clip(np.einsum("ij,ij->i", rel, seg) / np.maximum(seg_len**2, 1e-12), 0.0, 1.0)
    foot = points[:-1] + t[:, None] * seg
    best = int(np.argmin(np.hypot(foot[:, 0] - state.x, foot[:, 1] - state.y)))
    s0 = float(arc[best] + t[best] * seg_len[best])

    s = s0 + speed * cfg.dt * np.arange(H + 1)
    headings = np.unwrap(np.arctan2(seg[:, 1], seg[:, 0]))
    # Extend the last segment linearly past the trajectory end.
    end_dir = seg[-1] / seg_len[-1]
    x_ref = np.interp(s, arc, points[:, 0]) + np.maximum(s - arc[-1], 0.0) * end_dir[0]
    y_ref = np.interp(s, arc, points[:, 1]) + np.maximum(s - arc[-1], 0.0) * end_dir[1]
    seg_mid = 0.5 * (arc[:-1] + arc[1:])
    theta_ref = np.interp(s, seg_mid, headings)
    v_ref = np.full(H + 1, speed)

    if points.shape[0] >= 3:
        kappa = curvature_profile(points, closed=False)
        gamma = np.interp(s, arc, kappa)
    else:
        gamma = np.zeros(H + 1)
    delta_ref = np.clip(np.arctan(params.wheelbase * gamma), -params.delta_max, params.delta_max)
    a_ref = np.append(np.diff(v_ref) / cfg.dt, 0.0)

    ref_states = np.column_stack((x_ref, y_ref, v_ref, theta_ref))
    ref_inputs = np.column_stack((a_ref, delta_ref))
    return ref_states, ref_inputs


class MpcController(BaseController):
    name = "mpc"

    def __init__(self, config: MpcConfig, params: VehicleParams, qp_settings: QpSettings | None = None):
        self.config = config
        self.params = params
        self.qp_settings = qp_settings or QpSettings()
        self._warm: tuple[NDArray[np.float64], NDArray[np.float64]] | None = None
        self.last_solution: MpcSolution | None = None

    def reset(self) -> None:
        self._warm = None
        self.last_solution = None

    def control(self, state: VehicleState, trajectory: NDArray[np.float64], reference_speed: float) -> Action:
        speed = self.config.speed if self.config.speed is not None else reference_speed
        speed = min(speed, self.params.v_max)
        ref_states, ref_inputs = reference_from_trajectory(state, trajectory, speed, self.config, self.params)
        try:
            solution = solve_mpc(
                state,
                ref_states,
                ref_inputs,
                self.config,
                self.params,
                qp_settings=self.qp_settings,
                warm_start=self._warm,
            )
            if solution.qp is not None:
                self._warm = (solution.qp.x, solution.qp.y)
        except QpConvergenceError as e:
            logger.warning("mpc_qp_not_converged", iterations=len(e.residual_history))
            layout = _Layout(self.config.horizon)
            x = np.asarray(e.x)
            solution = MpcSolution(
                states=x[: layout.n_states].reshape(-1, NX),
                inputs=x[layout.n_states : layout.n_states + layout.n_inputs].reshape(-1, NU),
                objective=float("nan"),
                iterations=len(e.residual_history),
                dynamics_residual=float("nan"),
                bound_violation=float("nan"),
                converged=False,
            )
            self._warm = None

        self.last_solution = solution
        accel, delta = (float(v) for v in solution.first_input)
        v_des = float(np.clip(state.v + accel * self.config.dt, 0.0, self.params.v_max))
        return self.params.clamp(Action(delta_des=delta, v_des=v_des))
