import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.errors import TrackValidationError
from src.geometry import as_points


def curvature_triples(points: NDArray[np.float64], closed: bool) -> tuple[NDArray[np.float64], ...]:
    if closed:
        return np.roll(points, 1, axis=0), points, np.roll(points, -1, axis=0)
    return points[:-2], points[1:-1], points[2:]


def menger_curvature(
    p0: NDArray[np.float64], p1: NDArray[np.float64], p2: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Signed inverse circumradius of each triple; positive for counter-clockwise turns."""
    d1 = p1 - p0
    d2 = p2 - p1
    d3 = p2 - p0
    cross = d1[:, 0] * d3[:, 1] - d1[:, 1] * d3[:, 0]
    denom = np.linalg.norm(d1, axis=1) * np.linalg.norm(d2, axis=1) * np.linalg.norm(d3, axis=1)
    safe = denom > 0.0
    kappa = np.zeros(p0.shape[0], dtype=np.float64)
    kappa[safe] = 2.0 * cross[safe] / denom[safe]
    return kappa


def menger_curvature_gradient(
    p0: NDArray[np.float64], p1: NDArray[np.float64], p2: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Curvature of each triple and its partial derivatives with respect to the three points."""
    d1 = p1 - p0
    d2 = p2 - p1
    d3 = p2 - p0
    a = np.linalg.norm(d1, axis=1)
    b = np.linalg.norm(d2, axis=1)
    c = np.linalg.norm(d3, axis=1)
    cross = d1[:, 0] * d3[:, 1] - d1[:, 1] * d3[:, 0]

    safe = (a > 0.0) & (b > 0.0) & (c > 0.0)
    a_s = np.where(safe, a, 1.0)
    b_s = np.where(safe, b, 1.0)
    c_s = np.where(safe, c, 1.0)
    g = np.where(safe, 1.0 / (a_s * b_s * c_s), 0.0)
    kappa = 2.0 * cross * g

    dcross_p1 = np.column_stack((d3[:, 1], -d3[:, 0]))
    dcross_p2 = np.column_stack((-d1[:, 1], d1[:, 0]))
    dcross_p0 = -(dcross_p1 + dcross_p2)

    u1 = d1 / a_s[:, None]
    u2 = d2 / b_s[:, None]
    u3 = d3 / c_s[:, None]
    # d(log abc)/dp for each point
    dlog_p0 = -u1 / a_s[:, None] - u3 / c_s[:, None]
    dlog_p1 = u1 / a_s[:, None] - u2 / b_s[:, None]
    dlog_p2 = u2 / b_s[:, None] + u3 / c_s[:, None]

    two_g = (2.0 * g)[:, None]
    k = kappa[:, None]
    grad0 = two_g * dcross_p0 - k * dlog_p0
    grad1 = two_g * dcross_p1 - k * dlog_p1
    grad2 = two_g * dcross_p2 - k * dlog_p2
    mask = safe[:, None]
    return kappa, grad0 * mask, grad1 * mask, grad2 * mask


def curvature_profile(points: ArrayLike, closed: bool) -> NDArray[np.float64]:
    pts = as_points(points)
    if pts.shape[0] < 3:
        raise TrackValidationError("points", f"curvature needs at least 3 points, got {pts.shape[0]}")
    kappa = menger_curvature(*curvature_triples(pts, closed))
    if closed:
        return kappa
    return np.concatenate(([kappa[0]], kappa, [kappa[-1]]))


def heading_profile(points: ArrayLike, closed: bool) -> NDArray[np.float64]:
    pts = as_points(points)
    if closed:
        tangent = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
    else:
        tangent = np.gradient(pts, axis=0)
    return np.arctan2(tangent[:, 1], tangent[:, 0])
