"""Camera models, projection math and pose error metrics.

Conventions used throughout the package:

  World frame (right-handed):  z points up, scene units are centimeters.
  Camera frame (computer vision):  x right, y down, z forward along the
  optical axis.  A pose [R | t] maps world to camera, x_cam = R x + t.
  Image frame:  u right, v down, in pixels; integer coordinates are pixel
  centers.

The full projection is  u ~ K [R | t] [x; 1]  followed by the perspective
divide  pi([x, y, lam]) = [x/lam, y/lam].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProjection

DIVIDE_EPS = 1e-12


def _readonly(a, shape, dtype=np.float64):
    out = np.array(a, dtype=dtype).reshape(shape)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Pose:
    """Rigid world-to-camera transform [R | t]."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", _readonly(self.R, (3, 3)))
        object.__setattr__(self, "t", _readonly(self.t, (3,)))
        if not np.allclose(self.R @ self.R.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(self.R) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1")

    def matrix(self) -> np.ndarray:
        """3x4 matrix [R | t]."""
        return np.hstack([self.R, self.t[:, None]])

    def center(self) -> np.ndarray:
        """Camera center in world coordinates, c = -R^T t."""
        return -self.R.T @ self.t


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


def projection_matrix(intrinsics: Intrinsics, pose: Pose) -> np.ndarray:
    """Full 3x4 projection P = K [R | t]."""
    return intrinsics.matrix() @ pose.matrix()


def perspective_divide(h) -> np.ndarray:
    """pi([x, y, lam]) = [x/lam, y/lam]; raises when |lam| <= 1e-12."""
    h = np.asarray(h, dtype=np.float64)
    if abs(h[2]) <= DIVIDE_EPS:
        raise DegenerateProjection(f"homogeneous scale {h[2]!r} too close to zero")
    return h[:2] / h[2]


def project(P: np.ndarray, x) -> np.ndarray:
    """Project a 3D point through a 3x4 projection matrix."""
    x = np.asarray(x, dtype=np.float64)
    return perspective_divide(P @ np.append(x, 1.0))


def project_points(P: np.ndarray, X: np.ndarray):
    """Vectorized projection of an (N, 3) array.

    Returns (uv, lam): (N, 2) pixel coordinates and the (N,) homogeneous
    scales (camera depth when P = K[R|t]).  Rows with |lam| <= 1e-12 hold
    NaN instead of raising so callers can mask them.
    """
    X = np.asarray(X, dtype=np.float64)
    h = X @ P[:, :3].T + P[:, 3]
    lam = h[:, 2]
    ok = np.abs(lam) > DIVIDE_EPS
    uv = np.full((X.shape[0], 2), np.nan)
    uv[ok] = h[ok, :2] / lam[ok, None]
    return uv, lam


def reprojection_error(P: np.ndarray, x, u) -> float:
    """Pixel distance between project(P, x) and an observed image point."""
    return float(np.linalg.norm(project(P, x) - np.asarray(u, dtype=np.float64)))


def position_error(est: Pose, gt: Pose) -> float:
    """Distance between camera centers, in scene units (cm)."""
    return float(np.linalg.norm(est.center() - gt.center()))


def orientation_error(est: Pose, gt: Pose) -> float:
    """Geodesic angle of R_est R_gt^T in degrees, in [0, 180]."""
    cos_angle = (np.trace(est.R @ gt.R.T) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(cos_angle, -1.0, 1.0))))


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Orthogonal polar factor of M with det +1."""
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        R = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return R


def rotation_exp(w) -> np.ndarray:
    """Rodrigues exponential of a 3-vector (axis * angle in radians)."""
    w = np.asarray(w, dtype=np.float64)
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        K = skew(w)
        return np.eye(3) + K + 0.5 * K @ K
    K = skew(w / theta)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def skew(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Pose of a camera at `eye` looking toward `target`.

    `up` is the world up direction; with the default +z up, the camera's
    y axis (image down) maps to world -z so images come out upright.
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("eye and target coincide")
    forward = forward / norm
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    norm = np.linalg.norm(right)
    if norm < 1e-12:
        raise ValueError("viewing direction parallel to up")
    right = right / norm
    down = np.cross(forward, right)
    R = np.vstack([right, down, forward])
    return Pose(R=R, t=-R @ eye)
