import math

import numpy as np
from numpy.typing import NDArray

from src.sim.state import Action, VehicleParams, VehicleState


def _derivative(
    x: NDArray[np.float64], accel: float, steer_rate: float, wheelbase: float
) -> NDArray[np.float64]:
    # x = [px, py, theta, v, delta]
    _, _, theta, v, delta = x
    return np.array(
        [
            v * math.cos(theta),
            v * math.sin(theta),
            v * math.tan(delta) / wheelbase,
            accel,
            steer_rate,
        ]
    )


def actuator_rates(state: VehicleState, action: Action, params: VehicleParams, dt: float) -> tuple[float, float]:
    """Constant acceleration and steering rate over one step, limited by the actuator bounds.

    The commanded value is reached within the step when the limits allow it, otherwise the actuator slews at
    its limit.
    """
    accel = float(np.clip((action.v_des - state.v) / dt, -params.a_max, params.a_max))
    steer_rate = float(np.clip((action.delta_des - state.delta) / dt, -params.steer_rate_max, params.steer_rate_max))
    return accel, steer_rate


def step_dynamics(state: VehicleState, action: Action, params: VehicleParams, dt: float) -> VehicleState:
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    action = params.clamp(action)
    accel, steer_rate = actuator_rates(state, action, params, dt)

    x = np.array([state.x, state.y, state.theta, state.v, state.delta], dtype=np.float64)
    k1 = _derivative(x, accel, steer_rate, params.wheelbase)
    k2 = _derivative(x + 0.5 * dt * k1, accel, steer_rate, params.wheelbase)
    k3 = _derivative(x + 0.5 * dt * k2, accel, steer_rate, params.wheelbase)
    k4 = _derivative(x + dt * k3, accel, steer_rate, params.wheelbase)
    x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return VehicleState(
        x=float(x[0]),
        y=float(x[1]),
        v=float(np.clip(x[3], 0.0, params.v_max)),
        theta=float(x[2]),
        delta=float(np.clip(x[4], -params.delta_max, params.delta_max)),
    )
