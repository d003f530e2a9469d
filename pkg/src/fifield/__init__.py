"""Fisher information fields for 6-DoF visual localization.

A voxel map stores rotation-independent factors of the Fisher
information that bearing observations of mapped landmarks carry about a
camera pose. Any pose's full 6x6 information matrix, or a scalar metric
of it, is then recovered in constant time, independent of landmark
count. The package adds reference planners that consume the field and a
benchmark CLI.
"""
from .errors import (
    BadMagic,
    DegeneratePoint,
    EmptyGrid,
    FifieldError,
    NoPathError,
    OutOfField,
    SingularCostMatrix,
    SingularFov,
    SingularGram,
    TooFewSamples,
    TruncatedFile,
    VersionMismatch,
    WrongFactorKind,
)
from .geometry import Pose, bearing, sample_directions, skew, wrap_angle
from .fim import (
    DEFAULT_SIGMA,
    METRICS,
    PinholeCamera,
    bearing_jacobian,
    exact_pose_fim,
    exact_pose_fim_batch,
    exact_visible,
    fim_metric,
    landmark_fim,
)
from .visibility import (
    GpVisibility,
    QuadraticVisibility,
    SeKernelParams,
    build_gp_model,
    build_quad_model,
    gp_build,
    quad_coefficients,
    se_kernel,
    sigmoid_visibility,
    theta_visibility,
    train_lengthscale,
)
from .field import ALWAYS_MATCH, Field, GridConfig, Matchability, build
from .scenes import Scene, gen_clustered, gen_uniform
from .world import Box, ObstacleWorld, Sphere, obstacle_distance, segment_blocked
from .costs import (
    FieldRepr,
    LandmarkSpec,
    PotentialParams,
    collision_potential,
    info_potential,
    info_potential_grad,
    metric_threshold,
    metric_threshold_report,
)
from .rrt import ExactInfoRepr, PlanState, ValidityConfig, rrt_plan, state_valid, yaw_rotation
from .traj import (
    OptimizeResult,
    PolyTrajectory,
    TrajCostParams,
    fit_initial_trajectory,
    optimize_trajectory,
    trajectory_cost,
)
from . import kernels

__version__ = "0.1.0"

__all__ = [
    "ALWAYS_MATCH", "BadMagic", "Box", "DEFAULT_SIGMA", "DegeneratePoint", "EmptyGrid",
    "ExactInfoRepr", "Field", "FieldRepr", "FifieldError", "GpVisibility", "GridConfig",
    "LandmarkSpec", "METRICS", "Matchability", "NoPathError", "ObstacleWorld",
    "OptimizeResult", "OutOfField", "PinholeCamera", "PlanState", "PolyTrajectory", "Pose",
    "PotentialParams", "QuadraticVisibility", "Scene", "SeKernelParams",
    "SingularCostMatrix", "SingularFov", "SingularGram", "Sphere", "TooFewSamples",
    "TrajCostParams", "TruncatedFile", "ValidityConfig", "VersionMismatch",
    "WrongFactorKind", "bearing", "bearing_jacobian", "build", "build_gp_model",
    "build_quad_model", "collision_potential", "exact_pose_fim", "exact_pose_fim_batch", "exact_visible",
    "fim_metric", "fit_initial_trajectory", "gen_clustered", "gen_uniform", "gp_build",
    "info_potential", "info_potential_grad", "kernels", "landmark_fim", "metric_threshold",
    "metric_threshold_report", "obstacle_distance", "optimize_trajectory",
    "quad_coefficients", "rrt_plan", "sample_directions", "se_kernel", "segment_blocked",
    "sigmoid_visibility", "skew", "state_valid", "theta_visibility", "train_lengthscale",
    "trajectory_cost", "wrap_angle", "yaw_rotation",
]
