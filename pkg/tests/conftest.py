"""Shared fixtures: compiled kernels are warmed once per session."""

import numpy as np
import pytest

from fifield import (
    Field,
    GridConfig,
    PinholeCamera,
    build_gp_model,
    build_quad_model,
    gen_clustered,
    kernels,
)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    kernels.warmup()


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def camera():
    return PinholeCamera.from_fov()


@pytest.fixture(scope="session")
def small_scene():
    return gen_clustered(200, lo=(-5.0, -5.0, 0.0), hi=(5.0, 5.0, 5.0), seed=1)


@pytest.fixture(scope="session")
def small_grid():
    return GridConfig(
        origin=np.array([-5.0, -5.0, 0.0]),
        voxel_size=1.0,
        dims=np.array([10, 10, 5]),
    )


@pytest.fixture(scope="session")
def quad_model():
    return build_quad_model(v_alpha=0.5)


@pytest.fixture(scope="session")
def gp_model():
    return build_gp_model(n_s=30)


@pytest.fixture(scope="session")
def quad_field(small_scene, small_grid, quad_model):
    return Field.build(small_scene.positions, small_grid, quad_model, factor_kind="info")


@pytest.fixture(scope="session")
def gp_field(small_scene, small_grid, gp_model):
    return Field.build(small_scene.positions, small_grid, gp_model, factor_kind="info")


@pytest.fixture(scope="session")
def trace_field(small_scene, small_grid, quad_model):
    return Field.build(small_scene.positions, small_grid, quad_model, factor_kind="trace")
