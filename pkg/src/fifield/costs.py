"""Information thresholds and the information potential cost.

The threshold ties a physical requirement ("M landmarks between d_min and
d_max in view suffice to localize") to whatever representation evaluates
information along a trajectory, so the same requirement yields a
comparable epsilon for an exact point cloud and for any field variant.

The potential turns a metric value v into a cost that is zero above the
threshold, quadratic between 0 and the threshold, and linear below zero,
with value and slope continuous at both joints.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import FifieldError
from .fim import DEFAULT_SIGMA, PinholeCamera, fim_metric
from .geometry import Pose
from . import kernels


@dataclass(frozen=True)
class LandmarkSpec:
    """Random landmark configuration: M landmarks in the FoV cone, d in [d_min, d_max]."""

    M: int
    d_min: float
    d_max: float
    camera: PinholeCamera = dc_field(default_factory=PinholeCamera.from_fov)
    n_trials: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0 < self.d_min < self.d_max):
            raise ValueError("require 0 < d_min < d_max")
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")

    @staticmethod
    def from_dict(d: dict) -> "LandmarkSpec":
        cam = d.get("camera")
        camera = PinholeCamera(**cam) if cam else PinholeCamera.from_fov()
        return LandmarkSpec(
            M=int(d["M"]),
            d_min=float(d["d_min"]),
            d_max=float(d["d_max"]),
            camera=camera,
            n_trials=int(d.get("n_trials", 100)),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class PotentialParams:
    """Piecewise information potential. k_l and b_l keep it C1 at v=0."""

    epsilon: float
    k_q: float = 1.0

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.k_q <= 0:
            raise ValueError("k_q must be positive")

    @property
    def k_l(self) -> float:
        return -2.0 * self.k_q * self.epsilon

    @property
    def b_l(self) -> float:
        return self.k_q * self.epsilon**2


def info_potential(v, params: PotentialParams):
    """Potential cost of a metric value; accepts scalars or arrays."""
    arr = np.asarray(v, dtype=np.float64)
    quad = params.k_q * (arr - params.epsilon) ** 2
    lin = params.k_l * arr + params.b_l
    out = np.where(arr > params.epsilon, 0.0, np.where(arr >= 0.0, quad, lin))
    return float(out) if np.isscalar(v) or arr.ndim == 0 else out


def info_potential_grad(v, params: PotentialParams):
    """Derivative of info_potential with respect to v."""
    arr = np.asarray(v, dtype=np.float64)
    quad = 2.0 * params.k_q * (arr - params.epsilon)
    out = np.where(arr > params.epsilon, 0.0, np.where(arr >= 0.0, quad, params.k_l))
    return float(out) if np.isscalar(v) or arr.ndim == 0 else out


def collision_potential(d, eps_c: float):
    """Hinge on obstacle distance: zero beyond eps_c, C1 at both joints."""
    if eps_c <= 0:
        raise ValueError("eps_c must be positive")
    arr = np.asarray(d, dtype=np.float64)
    quad = (arr - eps_c) ** 2 / (2.0 * eps_c)
    lin = eps_c / 2.0 - arr
    out = np.where(arr > eps_c, 0.0, np.where(arr >= 0.0, quad, lin))
    return float(out) if np.isscalar(d) or arr.ndim == 0 else out


@dataclass(frozen=True)
class FieldRepr:
    """Evaluate threshold trials through a small field built per trial."""

    model: object
    factor_kind: str = "info"


@dataclass
class ThresholdReport:
    epsilon: float
    n_used: int
    n_degenerate: int
    values: np.ndarray


_COND_LIMIT = 1e12


def _sample_cone_points(rng: np.random.Generator, spec: LandmarkSpec) -> np.ndarray:
    """M points uniform in solid angle over the FoV cone, uniform in volume over distance."""
    m = spec.M
    cos_a = np.cos(spec.camera.half_fov_alpha)
    cos_t = rng.uniform(cos_a, 1.0, size=m)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t**2))
    phi = rng.uniform(0.0, 2 * np.pi, size=m)
    r = np.cbrt(rng.uniform(spec.d_min**3, spec.d_max**3, size=m))
    dirs = np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=1)
    return dirs * r[:, None]


def _trial_fim_exact(points: np.ndarray, sigma: float) -> np.ndarray:
    # all sampled points are in view by construction; no re-gating
    return kernels.landmark_fims(points, np.zeros(3), sigma).sum(axis=0)


def _trial_value_field(points: np.ndarray, repr_: FieldRepr, metric: str, sigma: float):
    from .field import Field, GridConfig

    config = GridConfig(origin=(-0.75, -0.75, -0.75), voxel_size=0.5, dims=(3, 3, 3))
    fld = Field.build(points, config, repr_.model, repr_.factor_kind, sigma=sigma)
    pose = Pose.identity()
    value = fld.query_metric(pose, metric, mode="nearest")
    fim = fld.query_fim(pose, mode="nearest") if repr_.factor_kind == "info" else None
    return value, fim


def metric_threshold_report(
    spec: LandmarkSpec,
    metric: str = "det",
    representation="exact",
    sigma: float = DEFAULT_SIGMA,
) -> ThresholdReport:
    """Mean metric over random trials; degenerate trials counted and excluded.

    representation is "exact" (sum per-landmark FIMs directly) or a
    FieldRepr (build a 3x3x3 field around the camera and query it). A
    trial is degenerate when its 6x6 FIM condition number exceeds 1e12;
    with a trace-factor field no FIM is available and no trial is
    excluded (the trace is well defined regardless of conditioning).
    """
    if metric not in ("det", "lmin", "trace"):
        raise ValueError(f"unknown metric {metric!r}")
    if isinstance(representation, str):
        if representation not in ("exact", "pc"):
            raise ValueError("representation must be 'exact' or a FieldRepr")
        representation = "exact"
    elif not isinstance(representation, FieldRepr):
        raise ValueError("representation must be 'exact' or a FieldRepr")
    if isinstance(representation, FieldRepr) and representation.factor_kind == "trace" and metric != "trace":
        raise FifieldError("trace-factor representation supports only the trace metric")

    rng = np.random.default_rng(spec.seed)
    values = []
    n_degenerate = 0
    for _ in range(spec.n_trials):
        points = _sample_cone_points(rng, spec)
        if representation == "exact":
            fim = _trial_fim_exact(points, sigma)
            value = fim_metric(fim, metric)
        else:
            value, fim = _trial_value_field(points, representation, metric, sigma)
        if fim is not None:
            w = np.linalg.eigvalsh(fim)
            if w[0] <= 0 or w[-1] / w[0] > _COND_LIMIT:
                n_degenerate += 1
                continue
        values.append(value)

    vals = np.asarray(values)
    eps = float(vals.mean()) if vals.size else 0.0
    return ThresholdReport(eps, int(vals.size), n_degenerate, vals)


def metric_threshold(
    spec: LandmarkSpec,
    metric: str = "det",
    representation="exact",
    sigma: float = DEFAULT_SIGMA,
) -> float:
    return metric_threshold_report(spec, metric, representation, sigma).epsilon
