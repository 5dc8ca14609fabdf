import numpy as np
import pytest

from src.geometry import Pose2D
from src.sim.grid import OccupancyGrid
from src.sim.state import VehicleParams
from src.track.generator import TrackAssets, build_track
from src.track.waypoints import Raceline


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run desk-scale training runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def oval() -> TrackAssets:
    return build_track("oval")


@pytest.fixture
def params() -> VehicleParams:
    return VehicleParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def empty_grid() -> OccupancyGrid:
    """20 m x 20 m free square centred on the origin, 0.05 m cells."""
    return OccupancyGrid(cells=np.zeros((400, 400), dtype=bool), resolution=0.05, origin=Pose2D(-10.0, -10.0, 0.0))


def make_straight_raceline(length: float = 10.0, spacing: float = 0.1, speed: float = 2.0) -> Raceline:
    xs = np.arange(0.0, length + 1e-9, spacing)
    data = np.column_stack((xs, np.zeros_like(xs), np.full_like(xs, speed), np.zeros_like(xs), np.zeros_like(xs)))
    return Raceline(data, closed=False)


@pytest.fixture
def straight_raceline() -> Raceline:
    return make_straight_raceline()
