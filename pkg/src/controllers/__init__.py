from src.controllers.base import BaseController, ControllerKind
from src.controllers.mpc import (
    MpcConfig,
    MpcController,
    MpcSolution,
    linearize_dynamics,
    reference_from_trajectory,
    solve_mpc,
)
from src.controllers.pure_pursuit import PurePursuitConfig, PurePursuitController, pure_pursuit_control
from src.controllers.qp import QpResult, QpSettings, qp_solve
from src.sim.state import VehicleParams


def build_controller(
    kind: ControllerKind | str,
    params: VehicleParams,
    pure_pursuit: PurePursuitConfig | None = None,
    mpc: MpcConfig | None = None,
) -> BaseController:
    kind = ControllerKind(kind)
    if kind is ControllerKind.PURE_PURSUIT:
        return PurePursuitController(pure_pursuit or PurePursuitConfig(), params)
    return MpcController(mpc or MpcConfig.from_params(params), params)


__all__ = [
    "BaseController",
    "ControllerKind",
    "MpcConfig",
    "MpcController",
    "MpcSolution",
    "PurePursuitConfig",
    "PurePursuitController",
    "QpResult",
    "QpSettings",
    "build_controller",
    "linearize_dynamics",
    "pure_pursuit_control",
    "qp_solve",
    "reference_from_trajectory",
    "solve_mpc",
]
