"""Unit tests for the separable visibility models."""

import json

import numpy as np
import pytest

from fifield import (
    GpVisibility,
    QuadraticVisibility,
    SeKernelParams,
    SingularFov,
    SingularGram,
    build_gp_model,
    build_quad_model,
    gp_build,
    quad_coefficients,
    sample_directions,
    se_kernel,
    sigmoid_visibility,
    theta_visibility,
    train_lengthscale,
)
from fifield.geometry import random_rotation


class TestQuadCoefficients:
    def test_constraints(self):
        """v(0)=1, v(pi)=0, v(alpha)=v_alpha by construction."""
        for alpha, va in [(np.pi / 4, 0.5), (np.pi / 3, 0.25), (0.9, 0.75)]:
            k2, k1, k0 = quad_coefficients(alpha, va)
            v = lambda c: k2 * c * c + k1 * c + k0
            assert v(1.0) == pytest.approx(1.0)
            assert v(-1.0) == pytest.approx(0.0)
            assert v(np.cos(alpha)) == pytest.approx(va)
            assert k1 == 0.5

    def test_reference_values(self):
        k2, k1, k0 = quad_coefficients(np.pi / 4, 0.5)
        assert k2 == pytest.approx(np.sqrt(2.0) / 2.0, abs=1e-12)
        assert k0 == pytest.approx(0.5 - np.sqrt(2.0) / 2.0, abs=1e-12)

    def test_degenerate_alpha(self):
        with pytest.raises(SingularFov):
            quad_coefficients(1e-12, 0.5)


class TestIndicators:
    def test_theta_visibility_binary(self):
        assert theta_visibility(0.2, 0.5) == 1.0
        assert theta_visibility(0.5, 0.5) == 1.0
        assert theta_visibility(0.6, 0.5) == 0.0

    def test_sigmoid_half_at_alpha(self):
        assert sigmoid_visibility(0.7, 0.7) == pytest.approx(0.5)

    def test_sigmoid_monotone(self):
        thetas = np.linspace(0.0, np.pi, 50)
        vals = sigmoid_visibility(thetas, np.pi / 4)
        assert (np.diff(vals) < 0).all()
        assert vals[0] > 0.9 and vals[-1] < 0.1


class TestQuadraticVisibility:
    def test_separation_exact(self, rng):
        """(v^r)^T v^p reproduces the quadratic in cos(theta) exactly."""
        m = build_quad_model(v_alpha=0.5)
        t = rng.standard_normal(3)
        p = t + rng.standard_normal(3) * 3.0
        rot = random_rotation(rng)
        u = (p - t) / np.linalg.norm(p - t)
        cos_t = float(rot[:, 2] @ u)
        assert m.value(rot, t, p) == pytest.approx(m.value_cos(cos_t), abs=1e-12)

    def test_n_v(self):
        assert build_quad_model().n_v == 10

    def test_position_vectors_batch(self, rng):
        m = build_quad_model()
        t = np.zeros(3)
        pts = rng.standard_normal((12, 3)) * 4.0 + np.array([0.0, 0.0, 6.0])
        batch = m.position_vectors(t, pts)
        for i, p in enumerate(pts):
            np.testing.assert_allclose(batch[i], m.position_vector(t, p), atol=1e-12)

    def test_spec_string(self):
        assert build_quad_model(v_alpha=0.5).spec_string() == "quad:0.5"

    def test_params_roundtrip(self, tmp_path):
        m = build_quad_model(v_alpha=0.25)
        path = tmp_path / "quad.json"
        m.save_params(path)
        d = json.loads(path.read_text())
        m2 = QuadraticVisibility(d["alpha"], d["k2"], d["k1"], d["k0"], d["v_alpha"])
        assert m2.value_cos(0.3) == pytest.approx(m.value_cos(0.3))


class TestSeKernel:
    def test_symmetric_and_peak(self, rng):
        params = SeKernelParams(sigma2=2.0, length_scale=0.7)
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        assert se_kernel(a, b, params) == pytest.approx(se_kernel(b, a, params))
        assert se_kernel(a, a, params) == pytest.approx(2.0)
        assert se_kernel(a, b, params) < 2.0

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            SeKernelParams(length_scale=0.0)


class TestGpVisibility:
    def test_build_inverse(self):
        zs = sample_directions(30)
        m = gp_build(zs, SeKernelParams(1.0, 0.5))
        gram = np.array([[se_kernel(a, b, SeKernelParams(1.0, 0.5)) for b in zs] for a in zs])
        np.testing.assert_allclose(m.kinv @ gram, np.eye(30), atol=1e-5)

    def test_interpolates_training_directions(self):
        """With tiny jitter the GP nearly interpolates the sigmoid targets."""
        m = build_gp_model(n_s=50)
        t = np.zeros(3)
        p = np.array([0.0, 0.0, 4.0])
        u = np.array([0.0, 0.0, 1.0])
        vp = m.position_vector(t, p)
        for z in m.samples[::7]:
            pred = float(m.rotation_vector_from_axis(z) @ vp)
            target = sigmoid_visibility(np.arccos(np.clip(z @ u, -1, 1)), m.alpha, m.k_s)
            assert pred == pytest.approx(target, abs=1e-3)

    def test_position_vectors_batch(self, gp_model, rng):
        t = np.ones(3)
        pts = rng.standard_normal((9, 3)) * 3.0 + np.array([0.0, 0.0, 8.0])
        batch = gp_model.position_vectors(t, pts)
        for i, p in enumerate(pts):
            np.testing.assert_allclose(batch[i], gp_model.position_vector(t, p), atol=1e-12)

    def test_n_v_matches_samples(self, gp_model):
        assert gp_model.n_v == 30
        assert isinstance(gp_model, GpVisibility)

    def test_spec_string(self, gp_model):
        assert gp_model.spec_string() == "gp:30"

    def test_duplicate_directions_rejected(self):
        zs = np.tile(np.array([[0.0, 0.0, 1.0]]), (8, 1))
        with pytest.raises(SingularGram):
            gp_build(zs, SeKernelParams(1.0, 0.5, jitter=0.0))

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            gp_build(np.eye(3), SeKernelParams())


class TestTrainLengthscale:
    def test_within_grid_and_deterministic(self):
        grid = np.geomspace(0.1, 1.5, 8)
        zs = sample_directions(20)
        l1 = train_lengthscale(50, zs, search_grid=grid, seed=2)
        l2 = train_lengthscale(50, zs, search_grid=grid, seed=2)
        assert l1 == l2
        assert grid[0] <= l1 <= grid[-1]

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            train_lengthscale(10, sample_directions(8), search_grid=np.array([]))
