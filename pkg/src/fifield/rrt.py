"""Sampling planner over 4-DoF states with information-gated validity.

States are (position, yaw). The camera is mounted looking along the
heading: at yaw 0 the optical axis is world +x, so yaw steers the view
direction while roll and pitch stay zero. A state is valid when it
clears obstacles by min_clearance and its information metric reaches
info_threshold; the metric comes either from a field (constant-time)
or from an exact point-cloud evaluation (linear in landmark count).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .errors import NoPathError, OutOfField
from .field import Field
from .fim import DEFAULT_SIGMA, PinholeCamera
from .geometry import Pose, rot_z, wrap_angle
from .world import ObstacleWorld

# camera mount: optical axis (1,0,0), image right (0,-1,0), image down (0,0,-1)
R_CAM_MOUNT = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])


def yaw_rotation(yaw: float) -> np.ndarray:
    """World-from-camera rotation of a heading-mounted camera."""
    return rot_z(yaw) @ R_CAM_MOUNT


def yaw_axes(yaws: np.ndarray) -> np.ndarray:
    """Optical axes for an array of yaws: (cos, sin, 0) rows."""
    yaws = np.asarray(yaws, dtype=np.float64)
    return np.stack([np.cos(yaws), np.sin(yaws), np.zeros_like(yaws)], axis=-1)


@dataclass(frozen=True)
class PlanState:
    position: np.ndarray
    yaw: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=np.float64).reshape(3).copy()
        )
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def pose(self) -> Pose:
        return Pose(yaw_rotation(self.yaw), self.position)


class ExactInfoRepr:
    """Information evaluation against the raw landmark set."""

    def __init__(self, points, camera: PinholeCamera | None = None, sigma: float = DEFAULT_SIGMA):
        self.points = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        self.camera = camera if camera is not None else PinholeCamera.from_fov()
        self.sigma = float(sigma)

    def metric_batch(self, positions, yaws, metric: str):
        vals = kernels.pc_metric_yaw_batch(
            np.ascontiguousarray(positions, dtype=np.float64),
            np.ascontiguousarray(yaws, dtype=np.float64),
            self.points,
            self.camera.as_tuple(),
            self.sigma,
            R_CAM_MOUNT,
            kernels.metric_id(metric),
        )
        return vals, np.ones(len(vals), dtype=bool)


@dataclass
class ValidityConfig:
    min_clearance: float = 0.0
    info_metric: str = "det"
    info_threshold: float = 0.0
    representation: object | None = None  # Field, ExactInfoRepr, or None (no gate)
    interp_mode: str = "nearest"

    def __post_init__(self) -> None:
        if self.min_clearance < 0:
            raise ValueError("min_clearance must be non-negative")


def _info_values(cfg: ValidityConfig, positions: np.ndarray, yaws: np.ndarray):
    """Metric values plus in-coverage flags for a batch of states."""
    rep = cfg.representation
    if rep is None:
        n = positions.shape[0]
        return np.full(n, np.inf), np.ones(n, dtype=bool)
    if isinstance(rep, ExactInfoRepr):
        return rep.metric_batch(positions, yaws, cfg.info_metric)
    return rep.metric_axis_batch(positions, yaw_axes(yaws), cfg.info_metric, cfg.interp_mode)


def state_valid(state: PlanState, world, cfg: ValidityConfig) -> bool:
    """Clearance and information gates; out-of-field counts as invalid."""
    if world is not None and world.distance(state.position) < cfg.min_clearance:
        return False
    if cfg.representation is None:
        return True
    try:
        vals, ok = _info_values(cfg, state.position.reshape(1, 3), np.asarray([state.yaw]))
    except OutOfField:
        return False
    return bool(ok[0] and vals[0] >= cfg.info_threshold)


def _angdist(a):
    """|wrapped angle difference|, elementwise, without trig."""
    d = np.abs(a) % (2.0 * np.pi)
    return np.where(d > np.pi, 2.0 * np.pi - d, d)


def _edge_states(p0, y0, p1, y1, resolution):
    """States along an edge at fixed spacing, both endpoints included."""
    dist = float(np.linalg.norm(p1 - p0))
    dyaw = wrap_angle(y1 - y0)
    n = max(2, int(np.ceil(max(dist, abs(dyaw)) / resolution)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    positions = p0 + ts[:, None] * (p1 - p0)
    yaws = y0 + ts * dyaw
    return positions, yaws


@dataclass
class RrtResult:
    path: list
    cost: float
    growth: list  # (elapsed seconds, vertices, edge checks)
    vertices: int
    edge_checks: int
    iterations: int


def _assemble_result(pos, yaw, parent, n, goal, goal_parent, goal_cost, growth, edge_checks, it):
    result = RrtResult([], float(goal_cost), growth, n, edge_checks, it)
    if goal_parent < 0:
        err = NoPathError(f"no valid path after {it} iterations ({n} vertices)")
        err.result = result
        raise err
    chain = [PlanState(goal.position, goal.yaw)]
    i = goal_parent
    while i >= 0:
        chain.append(PlanState(pos[i], yaw[i]))
        i = int(parent[i])
    chain.reverse()
    result.path = chain
    return result


_DUMMY_SLOTS = np.zeros(1, dtype=np.int32)
_DUMMY_FACTORS = np.zeros((1, 1))
_DUMMY_DIRS = np.zeros((1, 3))
_DUMMY_POINTS = np.zeros((1, 3))


def _core_gate_args(cfg: ValidityConfig, world):
    """Argument tuple for the compiled planner loop, or None if unsupported.

    The compiled loop handles obstacle worlds plus field / exact /
    ungated information checks; anything else (custom worlds, custom
    representations) runs on the python loop instead.
    """
    if not kernels.rrt_core_available():
        return None
    if world is None:
        spheres = np.empty((0, 4))
        boxes = np.empty((0, 6))
    elif isinstance(world, ObstacleWorld):
        spheres = np.array(
            [[*s.center, s.radius] for s in world.spheres], dtype=np.float64
        ).reshape(-1, 4)
        boxes = np.array(
            [[*b.lo, *b.hi] for b in world.boxes], dtype=np.float64
        ).reshape(-1, 6)
    else:
        return None

    rep = cfg.representation
    threshold = float(cfg.info_threshold)
    trilinear = cfg.interp_mode == "trilinear"
    gate_mode, gmodel = 0, 1
    slots, factors = _DUMMY_SLOTS, _DUMMY_FACTORS
    origin, vsize = np.zeros(3), 1.0
    dims = np.ones(3, dtype=np.int64)
    k2 = k1 = k0 = 0.0
    zs, sig2, ell = _DUMMY_DIRS, 1.0, 1.0
    mid, is_trace = 2, False
    points = _DUMMY_POINTS
    fx = fy = cx = cy = width = height = 1.0
    sigma = 1.0

    if rep is None:
        pass
    elif isinstance(rep, ExactInfoRepr):
        gate_mode = 2
        points = rep.points
        fx, fy, cx, cy, width, height = rep.camera.as_tuple()
        sigma = rep.sigma
        mid = kernels.metric_id(cfg.info_metric)
    elif isinstance(rep, Field):
        kind = rep._mkind
        if kind == "quad":
            gmodel = 1
            k2, k1, k0 = rep._margs
        elif kind == "gp":
            gmodel = 2
            zs, sig2, ell = rep._margs
        else:
            return None
        gate_mode = 1
        slots, factors = rep.slots, rep.factors
        origin, vsize, dims = rep._origin, rep._vsize, rep._dims
        mid = kernels.metric_id(cfg.info_metric)
        is_trace = rep.factor_kind == "trace"
    else:
        return None

    return (
        spheres, boxes, float(cfg.min_clearance),
        gate_mode, gmodel,
        slots, factors, origin, float(vsize), dims,
        float(k2), float(k1), float(k0), zs, float(sig2), float(ell),
        mid, is_trace, trilinear, threshold,
        points, fx, fy, cx, cy, width, height, sigma, R_CAM_MOUNT,
    )


def _plan_with_core(
    start, goal, lo, hi, gate, w_pos, w_yaw, gamma, time_budget, seed, max_iters,
    step, yaw_step, rewire_radius, edge_resolution, goal_bias,
):
    cap = 4096
    pos = np.empty((cap, 3))
    yaw = np.empty(cap)
    parent = np.full(cap, -1, dtype=np.int64)
    cost = np.zeros(cap)
    pos[0], yaw[0] = start.position, start.yaw
    state = np.array([1, 0, -1, 0], dtype=np.int64)  # n, edge_checks, goal_parent, iters
    goalv = np.array([*goal.position, goal.yaw, np.inf])

    # 4-D vertex cell index over the sampling box and the yaw circle;
    # resolution tracks the tree so density stays near three vertices
    # per cell, balancing cell probes against member reads
    ext = np.maximum(hi - lo, 1e-6)

    def _grid(n):
        target = min(2_000_000, max(4096, n // 3))
        meas = float(ext.prod())
        if w_yaw > 0:
            meas *= 2.0 * np.pi * w_yaw / w_pos
            pitch = (meas / target) ** 0.25
        else:
            pitch = (meas / target) ** (1.0 / 3.0)
        gnx, gny, gnz = (min(1024, max(1, int(np.ceil(float(e) / pitch)))) for e in ext)
        gnw = (
            min(256, max(1, int(np.ceil(2.0 * np.pi * w_yaw / (w_pos * pitch)))))
            if w_yaw > 0
            else 1
        )
        return pitch, gnx, gny, gnz, gnw

    # full counting-sort compactions are O(n), so they run only when
    # the tree has grown 1.5x since the last one (vertices added in
    # between live on the overflow chains and the grid is frozen);
    # amortized index cost per insert stays constant
    cstart = head = None
    grid = None
    rebuild_at = 0
    nxt = np.full(cap, -1, dtype=np.int64)
    cid = np.empty(cap, dtype=np.int64)
    cxyz = np.empty((cap, 4))
    cidx = np.empty(cap, dtype=np.int64)
    cdn = np.empty(cap)

    growth: list = []
    chunk = 512
    ci = 0
    t0 = time.perf_counter()

    while True:
        it = int(state[3])
        if max_iters is not None and it >= max_iters:
            break
        if time_budget is not None and time.perf_counter() - t0 >= time_budget:
            break
        this_chunk = chunk if max_iters is None else min(chunk, max_iters - it)
        while cap - int(state[0]) < this_chunk:
            # compacted members and chain links carry over, so growth
            # must preserve cid/cxyz/nxt contents
            pos = np.vstack([pos, np.empty_like(pos)])
            yaw = np.concatenate([yaw, np.empty_like(yaw)])
            parent = np.concatenate([parent, np.full(cap, -1, dtype=np.int64)])
            cost = np.concatenate([cost, np.zeros(cap)])
            nxt = np.concatenate([nxt, np.full(cap, -1, dtype=np.int64)])
            cid = np.concatenate([cid, np.empty(cap, dtype=np.int64)])
            cxyz = np.vstack([cxyz, np.empty((cap, 4))])
            cap *= 2
            cidx = np.empty(cap, dtype=np.int64)
            cdn = np.empty(cap)
        n_now = int(state[0])
        rebuild = cstart is None or n_now >= rebuild_at
        if rebuild:
            grid = _grid(max(n_now, 4096))
            ncells = int(np.prod(grid[1:]))
            if cstart is None or ncells + 1 != cstart.shape[0]:
                # contents are fully rewritten by the compaction
                cstart = np.empty(ncells + 1, dtype=np.int64)
                head = np.empty(ncells, dtype=np.int64)
            rebuild_at = max(int(1.5 * n_now), 4096)
        else:
            # keep the chains from outgrowing the compacted base by
            # more than one chunk of inserts
            this_chunk = min(this_chunk, max(512, int(1.3 * (rebuild_at - n_now))))
        gcell, gnx, gny, gnz, gnw = grid
        cseed = (seed * 1000003 + ci) % 2147483629
        tc = time.perf_counter()
        kernels.rrt_chunk(
            pos, yaw, parent, cost, state, goalv,
            cstart, cid, cxyz, head, nxt, cidx, cdn,
            lo, hi, gcell, gnx, gny, gnz, gnw, int(rebuild), gamma,
            float(step), float(yaw_step), float(rewire_radius), float(edge_resolution),
            float(goal_bias), w_pos, w_yaw, int(this_chunk), int(cseed), *gate,
        )
        ci += 1
        growth.append((time.perf_counter() - t0, int(state[0]), int(state[1])))
        if time_budget is not None and not rebuild:
            # aim for ~0.25 s per batch so the budget lands accurately;
            # growth is damped because per-iteration cost rises with
            # the tree. Chunks that ran a compaction are not used as
            # timing samples, their cost is not representative
            el = max(time.perf_counter() - tc, 1e-4)
            chunk = int(min(max(this_chunk * 0.25 / el, 256), 2 * this_chunk, 16000))

    n, edge_checks, goal_parent, it = (int(v) for v in state)
    return _assemble_result(
        pos, yaw, parent, n, goal, goal_parent, float(goalv[4]), growth, edge_checks, it
    )


def rrt_plan(
    start: PlanState,
    goal: PlanState,
    bounds,
    world,
    cfg: ValidityConfig,
    weights: dict | None = None,
    time_budget: float | None = None,
    seed: int = 0,
    max_iters: int | None = None,
    step: float = 0.8,
    yaw_step: float = 0.8,
    rewire_radius: float = 1.6,
    edge_resolution: float = 0.2,
    goal_bias: float = 0.1,
    rewire_gamma: float | None = None,
) -> RrtResult:
    """Anytime RRT* over (position, yaw).

    Edge cost is w_pos * |dp| + w_yaw * |dyaw|; edges are validated by
    state gates at edge_resolution spacing. Runs until time_budget or
    max_iters (at least one required) and returns the best path with the
    growth log; raises NoPathError (carrying the log in .result) if the
    goal was never connected.

    The parent/rewire neighborhood shrinks with the tree as
    min(rewire_radius, rewire_gamma * (log(n+1)/(n+1))^(1/4)), the
    standard schedule that keeps the expected neighbor count
    logarithmic. rewire_gamma defaults to the value sized for the
    sampling volume under the edge metric; pass numpy.inf to pin the
    radius at rewire_radius.

    With the numba backend the search loop runs compiled, in chunks, so
    the growth log has one entry per chunk rather than per vertex and
    random sampling uses numba's RNG; results are deterministic per seed
    within a backend but differ between backends.
    """
    if time_budget is None and max_iters is None:
        raise ValueError("provide time_budget or max_iters")
    weights = weights or {}
    w_pos = float(weights.get("w_pos", 1.0))
    w_yaw = float(weights.get("w_yaw", 1.0))
    lo = np.asarray(bounds[0], dtype=np.float64).reshape(3)
    hi = np.asarray(bounds[1], dtype=np.float64).reshape(3)
    rng = np.random.default_rng(seed)

    if rewire_gamma is None:
        if w_pos > 0 and w_yaw > 0 and (hi > lo).all():
            # measure of the sampling set and of the unit ball, both under
            # the combined metric; d = 4 (three position axes plus yaw)
            mu = float(np.prod((hi - lo) * w_pos)) * 2.0 * np.pi * w_yaw
            ball = 2.0 * np.pi / 3.0
            gamma = (2.0 * (1.0 + 1.0 / 4.0) * mu / ball) ** 0.25
        else:
            gamma = np.inf  # degenerate metric or box: fixed radius
    else:
        gamma = float(rewire_gamma)

    if not state_valid(start, world, cfg):
        raise NoPathError("start state invalid")
    if not state_valid(goal, world, cfg):
        raise NoPathError("goal state invalid")

    gate = _core_gate_args(cfg, world) if w_pos > 0 else None
    if gate is not None:
        return _plan_with_core(
            start, goal, lo, hi, gate, w_pos, w_yaw, gamma, time_budget, int(seed),
            max_iters, step, yaw_step, rewire_radius, edge_resolution, goal_bias,
        )

    cap = 4096
    pos = np.empty((cap, 3))
    yaw = np.empty(cap)
    parent = np.full(cap, -1, dtype=np.int64)
    cost = np.zeros(cap)
    pos[0], yaw[0] = start.position, start.yaw
    n = 1

    edge_checks = 0
    growth: list = []
    goal_parent = -1
    goal_cost = np.inf
    t0 = time.perf_counter()

    def edge_ok(p0, y0, p1, y1) -> bool:
        nonlocal edge_checks
        edge_checks += 1
        positions, yaws = _edge_states(p0, y0, p1, y1, edge_resolution)
        # the start state is an already-validated tree vertex
        positions, yaws = positions[1:], yaws[1:]
        if world is not None and not world.is_empty:
            if (world.distance_batch(positions) < cfg.min_clearance).any():
                return False
        if cfg.representation is not None:
            vals, ok = _info_values(cfg, positions, yaws)
            if not ok.all() or (vals < cfg.info_threshold).any():
                return False
        return True

    it = 0
    while True:
        if max_iters is not None and it >= max_iters:
            break
        if time_budget is not None and time.perf_counter() - t0 >= time_budget:
            break
        it += 1

        if rng.uniform() < goal_bias:
            sp, sy = goal.position, goal.yaw
        else:
            sp = rng.uniform(lo, hi)
            sy = rng.uniform(-np.pi, np.pi)

        # nearest by combined metric (full scan)
        dp = pos[:n] - sp
        d = w_pos * np.linalg.norm(dp, axis=1) + w_yaw * _angdist(yaw[:n] - sy)
        ni = int(np.argmin(d))

        # steer with bounded position and yaw steps
        vec = sp - pos[ni]
        dist = float(np.linalg.norm(vec))
        new_p = sp if dist <= step else pos[ni] + vec * (step / dist)
        dy = wrap_angle(sy - yaw[ni])
        new_y = wrap_angle(yaw[ni] + np.clip(dy, -yaw_step, yaw_step))

        if not edge_ok(pos[ni], yaw[ni], new_p, new_y):
            continue

        # choose best parent among the shrinking neighborhood
        rn = min(rewire_radius, gamma * (np.log(n + 1.0) / (n + 1.0)) ** 0.25)
        dpn = pos[:n] - new_p
        dn = w_pos * np.linalg.norm(dpn, axis=1) + w_yaw * _angdist(yaw[:n] - new_y)
        near = np.nonzero(dn <= rn)[0]
        best_parent = ni
        best_cost = cost[ni] + dn[ni]
        for j in near:
            cand = cost[j] + dn[j]
            if cand < best_cost and edge_ok(pos[j], yaw[j], new_p, new_y):
                best_parent, best_cost = int(j), cand

        if n == cap:
            cap *= 2
            pos = np.vstack([pos, np.empty_like(pos)])
            yaw = np.concatenate([yaw, np.empty_like(yaw)])
            parent = np.concatenate([parent, np.full(n, -1, dtype=np.int64)])
            cost = np.concatenate([cost, np.zeros(n)])
        k = n
        pos[k], yaw[k], parent[k], cost[k] = new_p, new_y, best_parent, best_cost
        n += 1

        # rewire the neighborhood through the new vertex
        for j in near:
            cand = best_cost + dn[j]
            if cand < cost[j] and edge_ok(new_p, new_y, pos[j], yaw[j]):
                parent[j] = k
                cost[j] = cand

        # try to connect the new vertex to the goal
        gd = w_pos * np.linalg.norm(goal.position - new_p) + w_yaw * abs(
            wrap_angle(goal.yaw - new_y)
        )
        if gd <= max(step, rewire_radius):
            total = best_cost + gd
            if total < goal_cost and edge_ok(new_p, new_y, goal.position, goal.yaw):
                goal_parent, goal_cost = k, total

        growth.append((time.perf_counter() - t0, n, edge_checks))

    return _assemble_result(
        pos, yaw, parent, n, goal, goal_parent, goal_cost, growth, edge_checks, it
    )


def path_cost(path: list, weights: dict | None = None) -> float:
    weights = weights or {}
    w_pos = float(weights.get("w_pos", 1.0))
    w_yaw = float(weights.get("w_yaw", 1.0))
    total = 0.0
    for a, b in zip(path[:-1], path[1:]):
        total += w_pos * float(np.linalg.norm(b.position - a.position))
        total += w_yaw * abs(wrap_angle(b.yaw - a.yaw))
    return total
