"""Piecewise-polynomial 4-DoF trajectories and information-aware refinement.

A trajectory holds order-7 polynomials per segment for x, y, z and yaw.
Segments join with matching derivatives up to order 3, so every
trajectory built from junction derivatives is C3 (and thus C2 as
required). The fit minimizes squared snap for position and squared
acceleration for yaw, solved in closed form over the free junction
derivatives. The optimizer then descends the total cost (dynamic +
collision + information) over all internal junction values and
derivatives with endpoints pinned; the dynamic gradient is analytic,
the sampled terms use central finite differences.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .costs import PotentialParams, collision_potential, info_potential
from .errors import SingularCostMatrix
from .rrt import ExactInfoRepr, PlanState, _info_values, ValidityConfig, yaw_axes
from .geometry import wrap_angle

ORDER = 7  # polynomial order per segment (8 coefficients)
NDERIV = 4  # junction continuity: value + derivatives 1..3


def _hermite_matrix(T: float) -> np.ndarray:
    """Map coefficients -> derivatives 0..3 at both segment ends."""
    A = np.zeros((8, 8))
    for k in range(NDERIV):
        A[k, k] = math.factorial(k)
        for i in range(k, 8):
            A[NDERIV + k, i] = math.perm(i, k) * T ** (i - k)
    return A


def _gram(T: float, k: int) -> np.ndarray:
    """Q with c^T Q c = integral over [0,T] of squared k-th derivative."""
    Q = np.zeros((8, 8))
    for i in range(k, 8):
        for j in range(k, 8):
            p = i + j - 2 * k + 1
            Q[i, j] = math.perm(i, k) * math.perm(j, k) * T**p / p
    return Q


class _JunctionBasis:
    """Per-segment maps between junction derivatives and coefficients.

    The stacked junction-derivative vector D per axis has length
    4*(S+1): four derivative orders at each junction. Segment s reads
    D[4s : 4s+8].
    """

    def __init__(self, durations: np.ndarray):
        durations = np.asarray(durations, dtype=np.float64)
        if (durations <= 0).any() or not np.isfinite(durations).all():
            raise SingularCostMatrix("segment durations must be positive and finite")
        self.durations = durations
        self.S = len(durations)
        self.L = NDERIV * (self.S + 1)
        self.M = []
        for T in durations:
            A = _hermite_matrix(T)
            try:
                self.M.append(np.linalg.inv(A))
            except np.linalg.LinAlgError as e:
                raise SingularCostMatrix(f"degenerate segment duration {T}") from e

    def cost_matrix(self, deriv_order: int) -> np.ndarray:
        """(L, L) quadratic form of the integrated squared derivative over D."""
        R = np.zeros((self.L, self.L))
        for s, T in enumerate(self.durations):
            G = self.M[s].T @ _gram(T, deriv_order) @ self.M[s]
            i = NDERIV * s
            R[i : i + 8, i : i + 8] += G
        return R

    def coeffs_from_derivs(self, D: np.ndarray) -> np.ndarray:
        """D (..., L) -> coefficients (..., S, 8)."""
        D = np.asarray(D, dtype=np.float64)
        out = np.empty(D.shape[:-1] + (self.S, 8))
        for s in range(self.S):
            i = NDERIV * s
            out[..., s, :] = D[..., i : i + 8] @ self.M[s].T
        return out


@dataclass
class PolyTrajectory:
    """coeffs (4, S, 8) ascending powers, axes ordered x, y, z, yaw."""

    coeffs: np.ndarray
    durations: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        self.durations = np.asarray(self.durations, dtype=np.float64).reshape(-1)
        if self.coeffs.shape != (4, len(self.durations), 8):
            raise ValueError("coeffs must be (4, S, 8)")

    @property
    def segment_count(self) -> int:
        return len(self.durations)

    @property
    def total_duration(self) -> float:
        return float(self.durations.sum())

    def _locate(self, times: np.ndarray):
        ends = np.cumsum(self.durations)
        seg = np.searchsorted(ends, times, side="right")
        seg = np.minimum(seg, self.segment_count - 1)
        starts = ends - self.durations
        return seg, times - starts[seg]

    def eval(self, times, order: int = 0) -> np.ndarray:
        """(K, 4) value (or time derivative) of each axis at the given times."""
        times = np.atleast_1d(np.asarray(times, dtype=np.float64))
        seg, tau = self._locate(times)
        out = np.empty((len(times), 4))
        # derivative-of-power basis rows per sample
        basis = np.zeros((len(times), 8))
        for i in range(order, 8):
            basis[:, i] = math.perm(i, order) * tau ** (i - order)
        for s in np.unique(seg):
            rows = seg == s
            out[rows] = basis[rows] @ self.coeffs[:, s, :].T
        return out

    def state_at(self, t: float) -> PlanState:
        v = self.eval([t])[0]
        return PlanState(v[:3], v[3])

    def sample(self, dt: float = 0.1, include_end: bool = True):
        total = self.total_duration
        times = np.arange(0.0, total + (1e-9 if include_end else -1e-9), dt)
        vals = self.eval(times)
        return times, vals[:, :3], vals[:, 3]

    def junction_derivatives(self) -> np.ndarray:
        """(4, L) derivatives 0..3 at every junction (from the left segment)."""
        S = self.segment_count
        D = np.empty((4, NDERIV * (S + 1)))
        for k in range(NDERIV):
            D[:, k] = self.coeffs[:, 0, k] * math.factorial(k)
        for s in range(S):
            T = self.durations[s]
            basis = np.zeros((NDERIV, 8))
            for k in range(NDERIV):
                for i in range(k, 8):
                    basis[k, i] = math.perm(i, k) * T ** (i - k)
            j = NDERIV * (s + 1)
            D[:, j : j + NDERIV] = self.coeffs[:, s, :] @ basis.T
        return D


def _boundary_vector(state: PlanState, derivs: np.ndarray | None) -> np.ndarray:
    """(4 axes, 4 orders) boundary block: value plus derivatives 1..3."""
    out = np.zeros((4, NDERIV))
    out[:3, 0] = state.position
    out[3, 0] = state.yaw
    if derivs is not None:
        d = np.asarray(derivs, dtype=np.float64)
        if d.shape != (4, NDERIV - 1):
            raise ValueError("boundary derivatives must be (4 axes, 3 orders)")
        out[:, 1:] = d
    return out


def _axis_orders() -> np.ndarray:
    # snap for position axes, acceleration for yaw
    return np.array([4, 4, 4, 2])


def fit_initial_trajectory(
    start: PlanState,
    goal: PlanState,
    duration: float,
    segments: int = 5,
    start_derivs: np.ndarray | None = None,
    goal_derivs: np.ndarray | None = None,
) -> PolyTrajectory:
    """Closed-form minimum-snap (position) / minimum-acceleration (yaw) fit.

    Junction values sit on the straight line between the endpoints
    (shortest-arc interpolation for yaw); junction derivatives are free
    and solved for in closed form. Boundary values and derivatives are
    met exactly.
    """
    if duration <= 0:
        raise SingularCostMatrix("duration must be positive")
    if segments < 1:
        raise ValueError("segments must be at least 1")
    S = segments
    basis = _JunctionBasis(np.full(S, duration / S))
    L = basis.L

    goal_yaw = start.yaw + wrap_angle(goal.yaw - start.yaw)
    b0 = _boundary_vector(start, start_derivs)
    b1 = _boundary_vector(goal, goal_derivs)
    b1[3, 0] = goal_yaw

    D = np.zeros((4, L))
    D[:, :NDERIV] = b0
    D[:, L - NDERIV :] = b1
    fracs = np.arange(1, S) / S
    D[:3, NDERIV : L - NDERIV : NDERIV] = (
        start.position[:, None] + (b1[:3, 0] - start.position)[:, None] * fracs
    )
    D[3, NDERIV : L - NDERIV : NDERIV] = start.yaw + (goal_yaw - start.yaw) * fracs

    if S > 1:
        fixed_idx = list(range(NDERIV)) + list(range(L - NDERIV, L))
        fixed_idx += [NDERIV * s for s in range(1, S)]
        fixed_idx = np.asarray(sorted(fixed_idx))
        free_idx = np.asarray([i for i in range(L) if i not in set(fixed_idx.tolist())])
        for order, axes in ((4, [0, 1, 2]), (2, [3])):
            R = basis.cost_matrix(order)
            R_ff = R[np.ix_(free_idx, free_idx)]
            R_fp = R[np.ix_(free_idx, fixed_idx)]
            try:
                sol = np.linalg.solve(R_ff, -R_fp @ D[axes][:, fixed_idx].T)
            except np.linalg.LinAlgError as e:
                raise SingularCostMatrix("free-derivative system is singular") from e
            for j, a in enumerate(axes):
                D[a, free_idx] = sol[:, j]

    return PolyTrajectory(basis.coeffs_from_derivs(D), basis.durations)


@dataclass
class TrajCostParams:
    mu_d: float = 1.0
    mu_c: float = 1.0
    mu_v: float = 1.0
    eps_c: float = 0.5
    potential: PotentialParams | None = None
    metric: str = "det"
    interp_mode: str = "nearest"
    dt: float = 0.1


def _dynamic_cost(traj: PolyTrajectory, basis: _JunctionBasis | None = None) -> float:
    if basis is None:
        basis = _JunctionBasis(traj.durations)
    D = traj.junction_derivatives()
    total = 0.0
    for order, axes in ((4, [0, 1, 2]), (2, [3])):
        R = basis.cost_matrix(order)
        for a in axes:
            total += float(D[a] @ R @ D[a])
    return total


def trajectory_cost(
    traj: PolyTrajectory,
    world,
    representation,
    params: TrajCostParams,
) -> dict:
    """Cost breakdown: closed-form dynamic term plus sampled integrals.

    Sampled terms use a Riemann sum at params.dt. Samples outside field
    coverage get the worst-case potential (the linear branch value at
    v=0) and are counted in n_out_of_field.
    """
    dynamic = _dynamic_cost(traj)

    total_t = traj.total_duration
    k = max(1, int(round(total_t / params.dt)))
    times = np.arange(k) * params.dt
    vals = traj.eval(times)
    positions, yaws = vals[:, :3], vals[:, 3]

    collision = 0.0
    if world is not None and not world.is_empty:
        d = world.distance_batch(positions)
        collision = float(collision_potential(d, params.eps_c).sum() * params.dt)

    information = 0.0
    n_oof = 0
    if representation is not None and params.potential is not None:
        cfg = ValidityConfig(
            info_metric=params.metric, representation=representation, interp_mode=params.interp_mode
        )
        v, ok = _info_values(cfg, positions, yaws)
        pot = info_potential(v, params.potential)
        oof = ~ok
        n_oof = int(oof.sum())
        if n_oof:
            pot = np.where(oof, params.potential.b_l, pot)
        information = float(pot.sum() * params.dt)

    total = params.mu_d * dynamic + params.mu_c * collision + params.mu_v * information
    return {
        "dynamic": dynamic,
        "collision": collision,
        "information": information,
        "total": total,
        "n_out_of_field": n_oof,
    }


class _FreeParamProblem:
    """Total cost and gradient over the free junction derivatives.

    Free parameters: all four derivative orders at the internal
    junctions, every axis. The dynamic term is quadratic in them with an
    analytic gradient; collision and information gradients use central
    differences sharing one step.
    """

    def __init__(self, init: PolyTrajectory, world, representation, params: TrajCostParams,
                 fd_step: float = 1e-4):
        self.basis = _JunctionBasis(init.durations)
        self.world = world
        self.representation = representation
        self.params = params
        self.fd_step = fd_step
        S = self.basis.S
        L = self.basis.L
        self.D0 = init.junction_derivatives()
        self.free_idx = np.arange(NDERIV, L - NDERIV)
        self.axis_R = [self.basis.cost_matrix(o) for o in (4, 2)]

        # sampled-cost plumbing: fixed time grid, per-segment power basis
        total_t = float(init.durations.sum())
        k = max(1, int(round(total_t / params.dt)))
        self.times = np.arange(k) * params.dt
        self.cfg = (
            ValidityConfig(info_metric=params.metric, representation=representation,
                           interp_mode=params.interp_mode)
            if representation is not None and params.potential is not None
            else None
        )
        self.n_evals = 0

    def traj_of(self, x: np.ndarray) -> PolyTrajectory:
        D = self.D0.copy()
        D[:, self.free_idx] = x.reshape(4, -1)
        return PolyTrajectory(self.basis.coeffs_from_derivs(D), self.basis.durations)

    def x0(self) -> np.ndarray:
        return self.D0[:, self.free_idx].reshape(-1).copy()

    def _sampled_cost(self, traj: PolyTrajectory) -> float:
        self.n_evals += 1
        p = self.params
        vals = traj.eval(self.times)
        positions, yaws = vals[:, :3], vals[:, 3]
        c = 0.0
        if self.world is not None and not self.world.is_empty and p.mu_c != 0.0:
            d = self.world.distance_batch(positions)
            c += p.mu_c * float(collision_potential(d, p.eps_c).sum() * p.dt)
        if self.cfg is not None and p.mu_v != 0.0:
            v, ok = _info_values(self.cfg, positions, yaws)
            pot = info_potential(v, p.potential)
            if not ok.all():
                pot = np.where(~ok, p.potential.b_l, pot)
            c += p.mu_v * float(pot.sum() * p.dt)
        return c

    def _dynamic_cost_grad(self, x: np.ndarray):
        D = self.D0.copy()
        D[:, self.free_idx] = x.reshape(4, -1)
        cost = 0.0
        grad = np.zeros_like(D)
        for a in range(4):
            R = self.axis_R[0] if a < 3 else self.axis_R[1]
            RD = R @ D[a]
            cost += float(D[a] @ RD)
            grad[a] = 2.0 * RD
        return self.params.mu_d * cost, self.params.mu_d * grad[:, self.free_idx].reshape(-1)

    def cost(self, x: np.ndarray) -> float:
        dyn, _ = self._dynamic_cost_grad(x)
        return dyn + self._sampled_cost(self.traj_of(x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        _, g = self._dynamic_cost_grad(x)
        h = self.fd_step
        needs_sampled = (
            (self.world is not None and not self.world.is_empty and self.params.mu_c != 0.0)
            or (self.cfg is not None and self.params.mu_v != 0.0)
        )
        if needs_sampled:
            for i in range(x.size):
                xp = x.copy()
                xp[i] += h
                cp = self._sampled_cost(self.traj_of(xp))
                xp[i] -= 2 * h
                cm = self._sampled_cost(self.traj_of(xp))
                g[i] += (cp - cm) / (2 * h)
        return g


@dataclass
class OptimizeResult:
    trajectory: PolyTrajectory
    cost: float
    initial_cost: float
    history: list = dc_field(default_factory=list)  # (iteration, cost, elapsed)
    iterations: int = 0
    n_evals: int = 0


def optimize_trajectory(
    init: PolyTrajectory,
    world,
    representation,
    params: TrajCostParams,
    max_iters: int = 100,
    fd_step: float = 1e-4,
) -> OptimizeResult:
    """Quasi-Newton descent over the free junction derivatives.

    Tracks the best iterate seen, so the returned cost never exceeds the
    initial cost. Endpoint values and derivatives are preserved exactly.
    """
    from scipy.optimize import minimize

    prob = _FreeParamProblem(init, world, representation, params, fd_step)
    x0 = prob.x0()
    initial_cost = prob.cost(x0)
    best = {"x": x0.copy(), "cost": initial_cost}
    history = [(0, initial_cost, 0.0)]
    t0 = time.perf_counter()

    def tracked_cost(x):
        c = prob.cost(x)
        if c < best["cost"]:
            best["cost"] = c
            best["x"] = x.copy()
        return c

    iterations = 0
    if x0.size:
        def on_iterate(_xk):
            nonlocal iterations
            iterations += 1
            history.append((iterations, best["cost"], time.perf_counter() - t0))

        minimize(
            tracked_cost,
            x0,
            jac=prob.gradient,
            method="L-BFGS-B",
            callback=on_iterate,
            options={"maxiter": max_iters},
        )

    return OptimizeResult(
        trajectory=prob.traj_of(best["x"]),
        cost=best["cost"],
        initial_cost=initial_cost,
        history=history,
        iterations=iterations,
        n_evals=prob.n_evals,
    )
