"""Unit tests for per-landmark and per-pose Fisher information."""

import numpy as np
import pytest

from fifield import (
    DegeneratePoint,
    PinholeCamera,
    Pose,
    bearing,
    bearing_jacobian,
    exact_pose_fim,
    exact_pose_fim_batch,
    exact_visible,
    fim_metric,
    landmark_fim,
    skew,
)
from fifield.geometry import random_rotation


def fim_by_jacobian(pose: Pose, p: np.ndarray, sigma: float) -> np.ndarray:
    """Independent construction: J^T J / sigma^2 from the bearing Jacobian."""
    j = bearing_jacobian(pose, p)
    return j.T @ j / sigma**2


class TestLandmarkFim:
    def test_matches_jacobian_construction(self, rng):
        """One landmark's information equals J^T J / sigma^2 at any rotation."""
        t = rng.standard_normal(3)
        p = t + rng.standard_normal(3) * 3.0
        pose = Pose(random_rotation(rng), t)
        np.testing.assert_allclose(
            landmark_fim(t, p, sigma=0.7), fim_by_jacobian(pose, p, 0.7), atol=1e-9
        )

    def test_rotation_independent(self, rng):
        """The Jacobian construction gives the same matrix for every rotation."""
        t = np.array([0.5, -1.0, 2.0])
        p = np.array([3.0, 1.0, 1.5])
        base = fim_by_jacobian(Pose(np.eye(3), t), p, 1.0)
        for _ in range(20):
            m = fim_by_jacobian(Pose(random_rotation(rng), t), p, 1.0)
            np.testing.assert_allclose(m, base, atol=1e-10)

    def test_symmetric_positive_semidefinite(self, rng):
        m = landmark_fim(rng.standard_normal(3), rng.standard_normal(3) * 4.0 + 8.0)
        np.testing.assert_allclose(m, m.T, atol=1e-12)
        assert np.linalg.eigvalsh(m).min() >= -1e-10

    def test_rank_two(self):
        """A single bearing constrains exactly two degrees of freedom."""
        m = landmark_fim(np.zeros(3), np.array([2.0, 1.0, 3.0]))
        assert np.linalg.matrix_rank(m, tol=1e-9) == 2

    def test_sigma_scaling(self):
        t = np.zeros(3)
        p = np.array([1.0, 2.0, 2.0])
        np.testing.assert_allclose(landmark_fim(t, p, sigma=2.0), landmark_fim(t, p, sigma=1.0) / 4.0)

    def test_range_scaling_of_translation_block(self):
        """Translational information falls with the fourth power of range
        when the landmark moves radially (1/n^2 model term and 1/n^2 from
        the lever arm of the fixed direction)."""
        t = np.zeros(3)
        u = np.array([1.0, 0.0, 0.0])
        near = landmark_fim(t, 2.0 * u)[:3, :3]
        far = landmark_fim(t, 4.0 * u)[:3, :3]
        np.testing.assert_allclose(far, near / 4.0, atol=1e-12)

    def test_degenerate_raises(self):
        with pytest.raises(DegeneratePoint):
            landmark_fim(np.ones(3), np.ones(3))

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            landmark_fim(np.zeros(3), np.ones(3), sigma=0.0)


class TestBearingJacobian:
    def test_finite_difference_translation(self, rng):
        pose = Pose(random_rotation(rng), rng.standard_normal(3))
        p = pose.translation + rng.standard_normal(3) * 3.0
        j = bearing_jacobian(pose, p)
        eps = 1e-7
        for k in range(3):
            dt = np.zeros(3)
            dt[k] = eps
            shifted = Pose(pose.rotation, pose.translation + dt)
            b1 = bearing(shifted.rotation.T @ (p - shifted.translation))
            b0 = bearing(pose.rotation.T @ (p - pose.translation))
            np.testing.assert_allclose((b1 - b0) / eps, j[:, k], atol=1e-5)

    def test_finite_difference_rotation(self, rng):
        """World-side perturbation: R -> exp(skew(w)) R, t -> exp(skew(w)) t."""
        pose = Pose(random_rotation(rng), rng.standard_normal(3))
        p = pose.translation + rng.standard_normal(3) * 3.0
        j = bearing_jacobian(pose, p)
        eps = 1e-7
        for k in range(3):
            w = np.zeros(3)
            w[k] = eps
            dr = np.eye(3) + skew(w)
            b1 = bearing((dr @ pose.rotation).T @ (p - dr @ pose.translation))
            b0 = bearing(pose.rotation.T @ (p - pose.translation))
            np.testing.assert_allclose((b1 - b0) / eps, j[:, 3 + k], atol=1e-5)


class TestExactVisible:
    def test_in_front_center(self, camera):
        pose = Pose.identity()
        assert exact_visible(pose, np.array([0.0, 0.0, 3.0]), camera)

    def test_behind(self, camera):
        assert not exact_visible(Pose.identity(), np.array([0.0, 0.0, -3.0]), camera)

    def test_outside_frustum(self, camera):
        # 90 degree horizontal FoV: x == 2z projects well outside
        assert not exact_visible(Pose.identity(), np.array([6.0, 0.0, 3.0]), camera)

    def test_edge_of_frustum(self, camera):
        assert exact_visible(Pose.identity(), np.array([2.9, 0.0, 3.0]), camera)


class TestExactPoseFim:
    def test_matches_bruteforce_sum(self, rng, camera):
        pts = rng.uniform(-4.0, 4.0, size=(60, 3)) + np.array([0.0, 0.0, 6.0])
        pose = Pose(random_rotation(rng), rng.standard_normal(3) * 0.5)
        expected = np.zeros((6, 6))
        for p in pts:
            if exact_visible(pose, p, camera):
                expected += fim_by_jacobian(pose, p, 1.0)
        got = exact_pose_fim(pose, pts, camera)
        np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-12)

    def test_empty_scene(self, camera):
        np.testing.assert_array_equal(
            exact_pose_fim(Pose.identity(), np.zeros((0, 3)), camera), np.zeros((6, 6))
        )

    def test_batch_matches_loop(self, rng, camera):
        pts = rng.uniform(-3.0, 3.0, size=(40, 3)) + np.array([0.0, 0.0, 5.0])
        rots = np.stack([random_rotation(rng) for _ in range(7)])
        ts = rng.standard_normal((7, 3)) * 0.5
        batch = exact_pose_fim_batch(rots, ts, pts, camera)
        for q in range(7):
            np.testing.assert_allclose(
                batch[q], exact_pose_fim(Pose(rots[q], ts[q]), pts, camera), atol=1e-12
            )


class TestFimMetric:
    def test_against_numpy(self, rng):
        a = rng.standard_normal((6, 6))
        m = a @ a.T
        assert fim_metric(m, "det") == pytest.approx(np.linalg.det(m), rel=1e-9)
        assert fim_metric(m, "lmin") == pytest.approx(np.linalg.eigvalsh(m).min(), rel=1e-9)
        assert fim_metric(m, "trace") == pytest.approx(np.trace(m), rel=1e-12)

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            fim_metric(np.eye(6), "nuclear")


class TestPinholeCamera:
    def test_from_fov_focal(self):
        cam = PinholeCamera.from_fov(np.pi / 2, width=640, height=640)
        assert cam.fx == pytest.approx(320.0)
        assert cam.half_fov_alpha == pytest.approx(np.pi / 4)

    def test_invalid(self):
        with pytest.raises(ValueError):
            PinholeCamera(fx=-1.0, fy=1.0, cx=0.0, cy=0.0, width=10, height=10, half_fov_alpha=0.5)
