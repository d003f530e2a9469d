"""Unit tests for pose, bearing, and direction-sampling utilities."""

import numpy as np
import pytest

from fifield import DegeneratePoint, Pose, TooFewSamples, bearing, sample_directions, skew, wrap_angle
from fifield.geometry import (
    camera_to_world,
    optical_axis,
    random_rotation,
    rot_x,
    rot_y,
    rot_z,
    world_to_camera,
)


class TestSkew:
    def test_matches_cross_product(self, rng):
        v = rng.standard_normal(3)
        w = rng.standard_normal(3)
        np.testing.assert_allclose(skew(v) @ w, np.cross(v, w), atol=1e-12)

    def test_antisymmetric(self, rng):
        s = skew(rng.standard_normal(3))
        np.testing.assert_allclose(s, -s.T)


class TestPose:
    def test_identity(self):
        p = Pose.identity()
        np.testing.assert_allclose(p.rotation, np.eye(3))
        np.testing.assert_allclose(p.translation, np.zeros(3))

    def test_rotation_validated(self):
        with pytest.raises(ValueError):
            Pose(rotation=np.eye(3) * 2.0)

    def test_from_yaw_pitch_roll_orthonormal(self):
        p = Pose.from_yaw_pitch_roll(0.3, -0.2, 0.7)
        r = p.rotation
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)

    def test_from_yaw_pitch_roll_composition(self):
        p = Pose.from_yaw_pitch_roll(0.3, -0.2, 0.7)
        np.testing.assert_allclose(p.rotation, rot_z(0.3) @ rot_y(-0.2) @ rot_x(0.7), atol=1e-12)

    def test_from_axis_angle(self):
        p = Pose.from_axis_angle(np.array([0.0, 0.0, 1.0]), 0.5)
        np.testing.assert_allclose(p.rotation, rot_z(0.5), atol=1e-12)

    def test_world_camera_round_trip(self, rng):
        p = Pose.from_yaw_pitch_roll(1.1, 0.4, -0.3, translation=rng.standard_normal(3))
        x = rng.standard_normal(3)
        np.testing.assert_allclose(camera_to_world(p, world_to_camera(p, x)), x, atol=1e-12)

    def test_optical_axis_is_third_column(self):
        r = rot_y(0.4) @ rot_x(0.2)
        np.testing.assert_allclose(optical_axis(r), r[:, 2])


class TestBearing:
    def test_unit_norm(self, rng):
        b = bearing(rng.standard_normal(3) * 5.0)
        assert np.linalg.norm(b) == pytest.approx(1.0)

    def test_direction_preserved(self):
        np.testing.assert_allclose(bearing(np.array([0.0, 0.0, 7.0])), [0.0, 0.0, 1.0])

    def test_degenerate_point_raises(self):
        with pytest.raises(DegeneratePoint):
            bearing(np.array([1e-12, 0.0, 0.0]))


class TestSampleDirections:
    def test_fibonacci_count_and_norms(self):
        d = sample_directions(50)
        assert d.shape == (50, 3)
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)

    def test_fibonacci_deterministic(self):
        np.testing.assert_array_equal(sample_directions(16), sample_directions(16))

    def test_fibonacci_covers_both_hemispheres(self):
        d = sample_directions(100)
        assert (d[:, 2] > 0.5).any() and (d[:, 2] < -0.5).any()

    def test_uniform_random_seeded(self):
        a = sample_directions(20, scheme="uniform_random", seed=5)
        b = sample_directions(20, scheme="uniform_random", seed=5)
        np.testing.assert_array_equal(a, b)

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            sample_directions(3)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            sample_directions(8, scheme="hexagonal")


class TestWrapAngle:
    @pytest.mark.parametrize(
        "a,expected",
        [(0.0, 0.0), (np.pi, np.pi), (-np.pi, np.pi), (3 * np.pi, np.pi), (2 * np.pi, 0.0)],
    )
    def test_values(self, a, expected):
        assert wrap_angle(a) == pytest.approx(expected)

    def test_range(self, rng):
        for a in rng.uniform(-20.0, 20.0, size=200):
            w = wrap_angle(a)
            assert -np.pi < w <= np.pi
            # same angle modulo full turns
            assert np.cos(w) == pytest.approx(np.cos(a), abs=1e-9)
            assert np.sin(w) == pytest.approx(np.sin(a), abs=1e-9)


def test_random_rotation_orthonormal(rng):
    r = random_rotation(rng)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0)
