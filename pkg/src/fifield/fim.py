"""Per-landmark and per-pose Fisher information under the bearing model.

A landmark observed as a unit bearing vector with isotropic Gaussian noise
(std sigma) carries a 6x6 information about the camera pose. With the pose
perturbation applied on the world side, the per-landmark information depends
only on the camera position, never its rotation:

    I_i = (1/sigma^2) [-I3, skew(p)]^T (I3 - u u^T)/n^2 [-I3, skew(p)]

with p the landmark, u the unit direction camera->landmark, n the range.
State ordering is [translation(3); rotation(3)].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegeneratePoint
from .geometry import Pose, skew

DEFAULT_SIGMA = 1.0

_EPS_RANGE = 1e-9


@dataclass(frozen=True)
class PinholeCamera:
    """Intrinsics for the exact visibility check (pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    half_fov_alpha: float

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0.0 < self.half_fov_alpha < np.pi):
            raise ValueError("half_fov_alpha must be in (0, pi)")
        object.__setattr__(
            self,
            "_astuple",
            (float(self.fx), float(self.fy), float(self.cx), float(self.cy),
             float(self.width), float(self.height)),
        )

    @staticmethod
    def from_fov(horizontal_fov: float = np.pi / 2, width: int = 640, height: int = 640) -> "PinholeCamera":
        """Camera with the given full horizontal field of view.

        alpha (half FoV) for the radial visibility models is half of
        horizontal_fov.  The default image is square so the vertical FoV
        matches the horizontal one; the alpha cone is then inscribed in the
        frustum, which is the regime the radial visibility models target.
        """
        f = 0.5 * width / np.tan(0.5 * horizontal_fov)
        return PinholeCamera(
            fx=f, fy=f, cx=width / 2.0, cy=height / 2.0,
            width=width, height=height, half_fov_alpha=horizontal_fov / 2.0,
        )

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return self._astuple


METRICS = ("det", "lmin", "trace")


def bearing_jacobian(pose: Pose, landmark_position: np.ndarray) -> np.ndarray:
    """3x6 derivative of the bearing measurement w.r.t. a world-side pose
    perturbation [translation; rotation].

    J = [(1/n) I3 - (1/n^3) p_c p_c^T] R_wc^T [-I3, skew(p_w)]
    """
    p_w = np.asarray(landmark_position, dtype=np.float64)
    d = p_w - pose.translation
    n = np.linalg.norm(d)
    if n <= _EPS_RANGE:
        raise DegeneratePoint(f"landmark range {n:.3e} below threshold")
    p_c = pose.rotation.T @ d
    left = np.eye(3) / n - np.outer(p_c, p_c) / n**3
    right = np.hstack([-np.eye(3), skew(p_w)])
    return left @ pose.rotation.T @ right


def landmark_fim(camera_position: np.ndarray, landmark_position: np.ndarray, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Rotation-independent 6x6 information of one bearing observation."""
    t = np.asarray(camera_position, dtype=np.float64)
    p = np.asarray(landmark_position, dtype=np.float64)
    n = np.linalg.norm(p - t)
    if n <= _EPS_RANGE:
        raise DegeneratePoint(f"landmark range {n:.3e} below threshold")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return kernels.landmark_fims(p.reshape(1, 3), t, sigma)[0]


def exact_visible(pose: Pose, landmark_position: np.ndarray, camera: PinholeCamera) -> bool:
    """True iff the landmark has positive depth and projects inside the image."""
    p_c = pose.rotation.T @ (np.asarray(landmark_position, dtype=np.float64) - pose.translation)
    z = p_c[2]
    if z <= 0.0:
        return False
    u = camera.fx * p_c[0] / z + camera.cx
    v = camera.fy * p_c[1] / z + camera.cy
    return bool(0.0 <= u < camera.width and 0.0 <= v < camera.height)


def exact_pose_fim(
    pose: Pose,
    landmark_positions: np.ndarray,
    camera: PinholeCamera,
    sigma: float = DEFAULT_SIGMA,
) -> np.ndarray:
    """Sum of landmark informations over the exactly-visible set.

    This is the point-cloud oracle the field is measured against; cost is
    linear in the landmark count.
    """
    pts = np.ascontiguousarray(landmark_positions, dtype=np.float64)
    if pts.size == 0:
        return np.zeros((6, 6))
    fx, fy, cx, cy, w, h = camera.as_tuple()
    return kernels.exact_fim(pose.rotation, pose.translation, pts, fx, fy, cx, cy, w, h, sigma)


def exact_pose_fim_batch(
    rotations: np.ndarray,
    translations: np.ndarray,
    landmark_positions: np.ndarray,
    camera: PinholeCamera,
    sigma: float = DEFAULT_SIGMA,
) -> np.ndarray:
    """(Q,6,6) exact FIMs for Q poses given as stacked rotations/translations."""
    rots = np.ascontiguousarray(rotations, dtype=np.float64).reshape(-1, 3, 3)
    ts = np.ascontiguousarray(translations, dtype=np.float64).reshape(-1, 3)
    pts = np.ascontiguousarray(landmark_positions, dtype=np.float64)
    if pts.size == 0:
        return np.zeros((ts.shape[0], 6, 6))
    fx, fy, cx, cy, w, h = camera.as_tuple()
    return kernels.exact_fim_batch(rots, ts, pts, fx, fy, cx, cy, w, h, sigma)


def fim_metric(fim: np.ndarray, kind: str) -> float:
    """Scalar information summary: "det", "lmin", or "trace"."""
    if kind not in METRICS:
        raise ValueError(f"unknown metric {kind!r}; expected one of {METRICS}")
    return kernels.metric_of(fim, kernels.metric_id(kind))
