"""Separable visibility approximations v(theta) ~ (v^r)^T v^p.

The FoV indicator (1 inside the cone of half-angle alpha, else 0) is not a
function of camera rotation times a function of position. Two surrogates
that are:

  - Quadratic: v = k2 cos^2(theta) + k1 cos(theta) + k0, which separates
    exactly into a 10-vector pair (v^r depends only on the optical axis,
    v^p only on the unit camera->landmark direction).
  - Gaussian-process regression of a sigmoid-smoothed indicator over the
    sphere of optical-axis directions: v^r holds the kernel evaluations
    against N_s fixed sample directions, v^p the precomputed regression
    weights per landmark. The same sample directions are shared by all
    landmarks.

Both models are immutable after construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize_scalar

from . import kernels
from .errors import DegeneratePoint, SingularFov, SingularGram
from .geometry import optical_axis, sample_directions

DEFAULT_KS = 15.0
DEFAULT_ALPHA = np.pi / 4
DEFAULT_JITTER = 1e-10
DEFAULT_NS = 70
GP_SAMPLE_COUNTS = (30, 50, 70, 150)

_COND_LIMIT = 1e12
_INV_RESIDUAL_LIMIT = 1e-6
_EPS_RANGE = 1e-9


def theta_visibility(theta: float, alpha: float) -> float:
    """Binary FoV indicator; the boundary theta == alpha counts as visible."""
    return 1.0 if theta <= alpha else 0.0


def sigmoid_visibility(theta, alpha: float, k_s: float = DEFAULT_KS):
    """Smoothed indicator 1/(1 + exp(-k_s (cos theta - cos alpha)))."""
    return 1.0 / (1.0 + np.exp(-k_s * (np.cos(theta) - np.cos(alpha))))


def sigmoid_visibility_cos(cos_theta, cos_alpha: float, k_s: float = DEFAULT_KS):
    return 1.0 / (1.0 + np.exp(-k_s * (cos_theta - cos_alpha)))


def quad_coefficients(alpha: float, v_alpha: float) -> tuple[float, float, float]:
    """Coefficients of the quadratic-in-cos(theta) model.

    Solves v(0)=1, v(pi)=0, v(alpha)=v_alpha. The first two constraints
    force k1 = 1/2 for any alpha.
    """
    c = np.cos(alpha)
    if abs(c) >= 1.0 - 1e-9:
        raise SingularFov(f"cos(alpha)={c:.12f} too close to +-1")
    k1 = 0.5
    k2 = (v_alpha - 0.5 * c - 0.5) / (c * c - 1.0)
    k0 = 0.5 - k2
    return float(k2), k1, float(k0)


@dataclass(frozen=True)
class SeKernelParams:
    """Squared-exponential kernel on 3-vectors: sigma2 exp(-|z1-z2|^2 / 2 l^2)."""

    sigma2: float = 1.0
    length_scale: float = 0.5
    jitter: float = DEFAULT_JITTER

    def __post_init__(self) -> None:
        if self.length_scale <= 0:
            raise ValueError("length_scale must be positive")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")


def se_kernel(z1: np.ndarray, z2: np.ndarray, params: SeKernelParams) -> float:
    d = np.asarray(z1, dtype=np.float64) - np.asarray(z2, dtype=np.float64)
    return float(params.sigma2 * np.exp(-(d @ d) / (2.0 * params.length_scale**2)))


def _se_gram(zs: np.ndarray, params: SeKernelParams) -> np.ndarray:
    sq = np.sum((zs[:, None, :] - zs[None, :, :]) ** 2, axis=2)
    k = params.sigma2 * np.exp(-sq / (2.0 * params.length_scale**2))
    return k + params.jitter * np.eye(zs.shape[0])


def _unit_toward(t: np.ndarray, p: np.ndarray) -> np.ndarray:
    d = np.asarray(p, dtype=np.float64) - np.asarray(t, dtype=np.float64)
    n = np.linalg.norm(d)
    if n <= _EPS_RANGE:
        raise DegeneratePoint(f"landmark range {n:.3e} below threshold")
    return d / n


class VisibilityModel:
    """Interface every separable visibility model implements.

    Subclasses provide matched rotation/position vectors of equal length
    n_v such that rotation_vector(R) @ position_vector(t, p) approximates
    the visibility of landmark p from a camera at t with rotation R.
    """

    kind: str
    alpha: float
    n_v: int

    def rotation_vector(self, rotation: np.ndarray) -> np.ndarray:
        return self.rotation_vector_from_axis(optical_axis(rotation))

    def rotation_vector_from_axis(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def position_vector(self, t: np.ndarray, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def position_vectors(self, t: np.ndarray, points: np.ndarray) -> np.ndarray:
        """(N, n_v) stack of position vectors for many landmarks."""
        return np.stack([self.position_vector(t, p) for p in points])

    def value(self, rotation: np.ndarray, t: np.ndarray, p: np.ndarray) -> float:
        return float(self.rotation_vector(rotation) @ self.position_vector(t, p))

    def params_dict(self) -> dict:
        raise NotImplementedError

    def save_params(self, path: str) -> None:
        """Human-readable parameter export (JSON)."""
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.params_dict(), f, indent=2)

    def spec_string(self) -> str:
        raise NotImplementedError


class QuadraticVisibility(VisibilityModel):
    """Quadratic-in-cos model; n_v = 10."""

    kind = "quadratic"

    def __init__(self, alpha: float, k2: float, k1: float, k0: float, v_alpha: float | None = None):
        self.alpha = float(alpha)
        self.k2, self.k1, self.k0 = float(k2), float(k1), float(k0)
        self.v_alpha = v_alpha
        self.n_v = 10

    @classmethod
    def from_alpha(cls, alpha: float = DEFAULT_ALPHA, v_alpha: float = 0.5) -> "QuadraticVisibility":
        k2, k1, k0 = quad_coefficients(alpha, v_alpha)
        return cls(alpha, k2, k1, k0, v_alpha=v_alpha)

    def rotation_vector_from_axis(self, z: np.ndarray) -> np.ndarray:
        return kernels.quad_vr(z, self.k2, self.k1, self.k0)

    def position_vector(self, t: np.ndarray, p: np.ndarray) -> np.ndarray:
        u = _unit_toward(t, p)
        return kernels.quad_vp(u.reshape(1, 3))[0]

    def position_vectors(self, t: np.ndarray, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=np.float64) - np.asarray(t, dtype=np.float64)
        n = np.linalg.norm(d, axis=1)
        if (n <= _EPS_RANGE).any():
            raise DegeneratePoint("landmark coincides with query position")
        return kernels.quad_vp(d / n[:, None])

    def value_cos(self, cos_theta: float) -> float:
        return self.k2 * cos_theta**2 + self.k1 * cos_theta + self.k0

    def params_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "v_alpha": self.v_alpha,
            "k2": self.k2,
            "k1": self.k1,
            "k0": self.k0,
        }

    def spec_string(self) -> str:
        v = self.v_alpha if self.v_alpha is not None else self.value_cos(np.cos(self.alpha))
        return f"quad:{v:g}"


class GpVisibility(VisibilityModel):
    """GP regression of the sigmoid-smoothed indicator; n_v = N_s."""

    kind = "gp"

    def __init__(
        self,
        samples: np.ndarray,
        params: SeKernelParams,
        alpha: float,
        k_s: float,
        kinv: np.ndarray,
    ):
        self.samples = np.ascontiguousarray(samples, dtype=np.float64)
        self.params = params
        self.alpha = float(alpha)
        self.k_s = float(k_s)
        self.kinv = np.ascontiguousarray(kinv)
        self.n_v = self.samples.shape[0]

    def rotation_vector_from_axis(self, z: np.ndarray) -> np.ndarray:
        d = self.samples - np.asarray(z, dtype=np.float64)
        sq = np.einsum("ij,ij->i", d, d)
        return self.params.sigma2 * np.exp(-sq / (2.0 * self.params.length_scale**2))

    def _targets(self, f: np.ndarray) -> np.ndarray:
        cos_t = self.samples @ f
        return sigmoid_visibility_cos(cos_t, np.cos(self.alpha), self.k_s)

    def position_vector(self, t: np.ndarray, p: np.ndarray) -> np.ndarray:
        return self.kinv @ self._targets(_unit_toward(t, p))

    def position_vectors(self, t: np.ndarray, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=np.float64) - np.asarray(t, dtype=np.float64)
        n = np.linalg.norm(d, axis=1)
        if (n <= _EPS_RANGE).any():
            raise DegeneratePoint("landmark coincides with query position")
        vs = sigmoid_visibility_cos((d / n[:, None]) @ self.samples.T, np.cos(self.alpha), self.k_s)
        return vs @ self.kinv

    def params_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "k_s": self.k_s,
            "n_s": self.n_v,
            "kernel_sigma2": self.params.sigma2,
            "length_scale": self.params.length_scale,
            "jitter": self.params.jitter,
            "sample_directions": self.samples.tolist(),
        }

    def spec_string(self) -> str:
        return f"gp:{self.n_v}"


def gp_build(
    samples: np.ndarray,
    params: SeKernelParams,
    alpha: float = DEFAULT_ALPHA,
    k_s: float = DEFAULT_KS,
) -> GpVisibility:
    """Build the GP model: Gram matrix, conditioning check, cached inverse.

    The inverse is Cholesky-based and refined with Newton iterations
    X <- X (2I - K X) until |K X - I|_inf < 1e-6.

    Raises:
        SingularGram: conditioning beyond 1e12 after jitter, or inverse
            residual not reducible below 1e-6.
    """
    zs = np.ascontiguousarray(samples, dtype=np.float64)
    if zs.ndim != 2 or zs.shape[1] != 3 or zs.shape[0] < 4:
        raise ValueError("samples must be (N>=4, 3)")
    gram = _se_gram(zs, params)
    eigs = np.linalg.eigvalsh(gram)
    cond = eigs[-1] / max(eigs[0], 1e-300)
    if eigs[0] <= 0 or cond > _COND_LIMIT:
        raise SingularGram(f"Gram conditioning {cond:.3e} exceeds {_COND_LIMIT:.0e}")
    eye = np.eye(zs.shape[0])
    kinv = cho_solve(cho_factor(gram), eye)
    kinv = 0.5 * (kinv + kinv.T)
    for _ in range(4):
        residual = np.abs(gram @ kinv - eye).max()
        if residual < _INV_RESIDUAL_LIMIT:
            break
        kinv = kinv @ (2.0 * eye - gram @ kinv)
        kinv = 0.5 * (kinv + kinv.T)
    else:
        residual = np.abs(gram @ kinv - eye).max()
    if residual >= _INV_RESIDUAL_LIMIT:
        raise SingularGram(f"inverse residual {residual:.3e} not below {_INV_RESIDUAL_LIMIT:.0e}")
    return GpVisibility(zs, params, alpha, k_s, kinv)


def _log_marginal_likelihood(gram: np.ndarray, targets: np.ndarray) -> float:
    """log p(Y | K) summed over target columns, dropping the 2*pi constant."""
    try:
        c, low = cho_factor(gram)
    except np.linalg.LinAlgError:
        return -np.inf
    alpha_ = cho_solve((c, low), targets)
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    n_cols = targets.shape[1]
    return float(-0.5 * np.sum(targets * alpha_) - 0.5 * n_cols * logdet)


def train_lengthscale(
    train_landmark_count: int,
    samples: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    k_s: float = DEFAULT_KS,
    search_grid: np.ndarray | None = None,
    seed: int = 0,
    sigma2: float = 1.0,
    jitter: float = DEFAULT_JITTER,
) -> float:
    """Length scale maximizing the marginal likelihood of sigmoid targets.

    Targets: for `train_landmark_count` random landmark bearings, the
    sigmoid visibility evaluated at every sampled optical-axis direction.
    Coarse grid search followed by bounded golden-section refinement
    between the grid neighbors of the best point; returns the best grid
    point when the argmax sits on the grid boundary.
    """
    zs = np.ascontiguousarray(samples, dtype=np.float64)
    if search_grid is None:
        search_grid = np.geomspace(0.05, 2.0, 24)
    grid = np.asarray(search_grid, dtype=np.float64)
    if grid.size == 0 or (grid <= 0).any():
        raise ValueError("search grid must be non-empty and positive")
    rng = np.random.default_rng(seed)
    # random landmarks in a shell; only the bearing matters for visibility
    radii = rng.uniform(0.5, 5.0, train_landmark_count)
    dirs = rng.standard_normal((train_landmark_count, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    positions = dirs * radii[:, None]
    bearings = positions / np.linalg.norm(positions, axis=1, keepdims=True)
    targets = sigmoid_visibility_cos(zs @ bearings.T, np.cos(alpha), k_s)

    def objective(ell: float) -> float:
        gram = _se_gram(zs, SeKernelParams(sigma2, ell, jitter))
        return _log_marginal_likelihood(gram, targets)

    scores = np.array([objective(l) for l in grid])
    best = int(np.argmax(scores))
    best_l, best_score = float(grid[best]), float(scores[best])
    if 0 < best < grid.size - 1:
        res = minimize_scalar(
            lambda l: -objective(l),
            bounds=(float(grid[best - 1]), float(grid[best + 1])),
            method="bounded",
            options={"xatol": 1e-4},
        )
        if res.success and -res.fun >= best_score:
            best_l, best_score = float(res.x), float(-res.fun)
    return best_l


_TRAINED_CACHE: dict[tuple, float] = {}


def build_gp_model(
    n_s: int = DEFAULT_NS,
    alpha: float = DEFAULT_ALPHA,
    k_s: float = DEFAULT_KS,
    length_scale: float | None = None,
    sigma2: float = 1.0,
    jitter: float = DEFAULT_JITTER,
    train_landmark_count: int = 200,
    train_seed: int = 0,
) -> GpVisibility:
    """Convenience constructor: fibonacci directions, trained length scale."""
    zs = sample_directions(n_s, "fibonacci")
    if length_scale is None:
        key = (n_s, round(alpha, 12), k_s, sigma2, jitter, train_landmark_count, train_seed)
        if key not in _TRAINED_CACHE:
            _TRAINED_CACHE[key] = train_lengthscale(
                train_landmark_count, zs, alpha, k_s, seed=train_seed, sigma2=sigma2, jitter=jitter
            )
        length_scale = _TRAINED_CACHE[key]
    return gp_build(zs, SeKernelParams(sigma2, length_scale, jitter), alpha, k_s)


def build_quad_model(alpha: float = DEFAULT_ALPHA, v_alpha: float = 0.5) -> QuadraticVisibility:
    return QuadraticVisibility.from_alpha(alpha, v_alpha)
