"""Rigid-body poses, unit bearing vectors, and direction sampling.

Conventions used everywhere in this package:
  - R_wc rotates camera-frame vectors into the world frame; t_wc is the
    camera position in the world. A world point maps into the camera as
    p_c = R_wc^T (p_w - t_wc).
  - The camera optical axis is the third column of R_wc.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePoint, TooFewSamples

_EPS_NORM = 1e-9
_EPS_ORTHO_DRIFT = 1e-6


def skew(v: np.ndarray) -> np.ndarray:
    """Return the 3x3 matrix S with S @ w == cross(v, w)."""
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _project_to_so3(m: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in Frobenius norm (sign-corrected SVD)."""
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


@dataclass(frozen=True)
class Pose:
    """Camera pose {R_wc, t_wc}. Treated as immutable after construction."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        drift = np.abs(r.T @ r - np.eye(3)).max()
        if drift > _EPS_ORTHO_DRIFT:
            r = _project_to_so3(r)
        if np.linalg.det(r) < 0.0:
            raise ValueError("rotation has negative determinant")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_yaw_pitch_roll(
        yaw: float, pitch: float = 0.0, roll: float = 0.0, translation=None
    ) -> "Pose":
        """R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
        t = np.zeros(3) if translation is None else translation
        return Pose(rot_z(yaw) @ rot_y(pitch) @ rot_x(roll), t)

    @staticmethod
    def from_axis_angle(axis: np.ndarray, angle: float, translation=None) -> "Pose":
        """Rodrigues formula; axis is normalized internally."""
        axis = np.asarray(axis, dtype=np.float64)
        n = np.linalg.norm(axis)
        if n < _EPS_NORM:
            raise ValueError("axis-angle axis has near-zero norm")
        k = skew(axis / n)
        r = np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)
        t = np.zeros(3) if translation is None else translation
        return Pose(r, t)


def world_to_camera(pose: Pose, point_w: np.ndarray) -> np.ndarray:
    """Map a world point into the camera frame: R_wc^T (p_w - t_wc)."""
    p = np.asarray(point_w, dtype=np.float64)
    return pose.rotation.T @ (p - pose.translation)


def camera_to_world(pose: Pose, point_c: np.ndarray) -> np.ndarray:
    """Inverse of world_to_camera."""
    p = np.asarray(point_c, dtype=np.float64)
    return pose.rotation @ p + pose.translation


def bearing(point_c: np.ndarray) -> np.ndarray:
    """Unit vector toward a camera-frame point.

    Raises:
        DegeneratePoint: if the point is within 1e-9 m of the camera center.
    """
    p = np.asarray(point_c, dtype=np.float64)
    n = np.linalg.norm(p)
    if n <= _EPS_NORM:
        raise DegeneratePoint(f"norm {n:.3e} below threshold")
    return p / n


def optical_axis(rotation: np.ndarray) -> np.ndarray:
    """Viewing direction of the camera: third column of R_wc."""
    return np.asarray(rotation, dtype=np.float64)[:, 2].copy()


def sample_directions(count: int, scheme: str = "fibonacci", seed: int | None = None) -> np.ndarray:
    """Sample `count` unit vectors covering the sphere.

    Args:
        count: number of directions, must be >= 4.
        scheme: "fibonacci" (deterministic spiral, near-uniform) or
            "uniform_random" (isotropic Gaussian normalization, needs seed).
        seed: RNG seed for the uniform_random scheme.

    Returns:
        (count, 3) array of unit vectors.
    """
    if count < 4:
        raise TooFewSamples(f"count {count} < 4")
    if scheme == "fibonacci":
        i = np.arange(count, dtype=np.float64)
        z = 1.0 - (2.0 * i + 1.0) / count
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        golden = np.pi * (3.0 - np.sqrt(5.0))
        phi = golden * i
        out = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    elif scheme == "uniform_random":
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((count, 3))
        out = v / np.linalg.norm(v, axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return out


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (normalized random quaternion)."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = (-a + np.pi) % (2.0 * np.pi)
    return float(np.pi - w)
