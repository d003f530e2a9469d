"""Benchmark and planning command line.

Subcommands: gen-scene, build, bench-timing, bench-accuracy,
optimal-views, smoothness, plan-rrt, plan-traj, inspect, plus
bench-backends for comparing the compiled and pure-numpy kernels.

Common flags: --scene, --field, --grid "ox,oy,oz:vs:nx,ny,nz",
--model (quad:v_alpha or gp:n_s, repeatable where it makes sense),
--factor {info|trace}, --metric {det|lmin|trace}, --seed, --out.

Reports are written as <out>.csv (case,value,unit,config_hash) plus
<out>.json with the full configuration echo; a summary always goes to
stdout. Exit codes: 0 success, 2 no path found, 3 file/format error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .costs import FieldRepr, LandmarkSpec, PotentialParams, metric_threshold
from .errors import FifieldError, NoPathError
from .field import Field, GridConfig, Matchability
from .fim import DEFAULT_SIGMA, PinholeCamera, exact_pose_fim, exact_pose_fim_batch, fim_metric
from .geometry import Pose, random_rotation, wrap_angle
from .rrt import (
    ExactInfoRepr,
    PlanState,
    R_CAM_MOUNT,
    ValidityConfig,
    _edge_states,
    rrt_plan,
    yaw_axes,
)
from .scenes import Scene, gen_clustered, gen_uniform
from .traj import TrajCostParams, fit_initial_trajectory, optimize_trajectory, trajectory_cost
from .visibility import build_gp_model, build_quad_model
from .world import ObstacleWorld

DEFAULT_GRID = "-5,-5,0:0.5:20,20,10"


# ──────────────────────────────────────────────────────────────────────
# parsing and report helpers
# ──────────────────────────────────────────────────────────────────────


def _parse_vec3(text: str) -> np.ndarray:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    return np.asarray(parts)


def parse_grid(text: str) -> GridConfig:
    """Parse "ox,oy,oz:vs:nx,ny,nz"."""
    try:
        o, vs, n = text.split(":")
        origin = _parse_vec3(o)
        dims = [int(x) for x in n.split(",")]
        if len(dims) != 3:
            raise ValueError
        return GridConfig(origin, float(vs), np.asarray(dims))
    except (ValueError, IndexError) as e:
        raise FifieldError(f"bad grid spec {text!r}, want ox,oy,oz:vs:nx,ny,nz") from e


def parse_model(text: str):
    """Parse "quad:v_alpha" or "gp:n_s" into a visibility model."""
    try:
        kind, arg = text.split(":")
        if kind == "quad":
            return build_quad_model(v_alpha=float(arg))
        if kind == "gp":
            return build_gp_model(n_s=int(arg))
    except (ValueError, IndexError) as e:
        raise FifieldError(f"bad model spec {text!r}, want quad:v_alpha or gp:n_s") from e
    raise FifieldError(f"unknown model kind in {text!r}")


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _write_report(out: str | None, experiment: str, config: dict, rows: list, extra: dict | None = None):
    h = _config_hash(config)
    summary = {"experiment": experiment, "config": config, "config_hash": h, "rows": rows}
    if extra:
        summary.update(extra)
    if out:
        with open(out + ".csv", "w") as f:
            f.write("case,value,unit,config_hash\n")
            for r in rows:
                f.write(f"{r['case']},{r['value']},{r['unit']},{h}\n")
        with open(out + ".json", "w") as f:
            json.dump(summary, f, indent=1, default=str)
        print(f"wrote {out}.csv and {out}.json")
    print(json.dumps(summary, indent=1, default=str))
    return summary


def _time_calls(fn, inputs: list, min_queries: int = 1000, warmup: int = 50) -> dict:
    """Per-call wall times over cycled inputs; medians in microseconds."""
    n_in = len(inputs)
    for i in range(min(warmup, 2 * n_in)):
        fn(inputs[i % n_in])
    times = np.empty(max(min_queries, n_in))
    for k in range(len(times)):
        x = inputs[k % n_in]
        t0 = time.perf_counter_ns()
        fn(x)
        times[k] = time.perf_counter_ns() - t0
    us = times / 1000.0
    return {
        "median_us": float(np.median(us)),
        "p10_us": float(np.percentile(us, 10)),
        "p90_us": float(np.percentile(us, 90)),
        "n": int(len(us)),
    }


def _interior_positions(rng: np.random.Generator, config: GridConfig, n: int) -> np.ndarray:
    lo = config.origin + config.voxel_size
    hi = config.origin + config.extent - config.voxel_size
    return rng.uniform(lo, hi, size=(n, 3))


def _random_poses(rng: np.random.Generator, config: GridConfig, n: int) -> list:
    positions = _interior_positions(rng, config, n)
    return [Pose(random_rotation(rng), positions[i]) for i in range(n)]


def _load_scene(path: str) -> Scene:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return Scene.load(path)


# ──────────────────────────────────────────────────────────────────────
# benchmark runners (shared with the acceptance tests)
# ──────────────────────────────────────────────────────────────────────


def run_bench_timing(
    scene: Scene,
    config: GridConfig,
    model_specs: list,
    n_poses: int = 200,
    min_queries: int = 1000,
    seed: int = 0,
    camera: PinholeCamera | None = None,
    sigma: float = DEFAULT_SIGMA,
    include_pc: bool = True,
    parallel: bool = False,
) -> list:
    """Build+query timing rows for each model and the exact point cloud."""
    camera = camera or PinholeCamera.from_fov()
    rng = np.random.default_rng(seed)
    poses = _random_poses(rng, config, n_poses)
    positions = np.stack([p.translation for p in poses])
    rotations = np.stack([p.rotation for p in poses])
    points = scene.positions
    rows = []

    def _batch_us(fn) -> float:
        """Median per-query time of a whole-pose-set batch call."""
        reps = max(3, -(-min_queries // len(poses)))
        totals = []
        for _ in range(reps):
            t0 = time.perf_counter_ns()
            fn()
            totals.append(time.perf_counter_ns() - t0)
        return float(np.median(totals) / 1e3 / len(poses))

    for spec in model_specs:
        model = parse_model(spec)
        for factor in ("info", "trace"):
            t0 = time.perf_counter()
            fld = Field.build(scene, config, model, factor, sigma=sigma, parallel=parallel)
            rows.append({"case": f"build:{spec}:{factor}", "value": time.perf_counter() - t0, "unit": "s"})
            mem = fld.memory_stats()
            rows.append({"case": f"mem:{spec}:{factor}", "value": mem["bytes_factors"], "unit": "B"})
            if factor == "info":
                t = _time_calls(lambda p, f=fld: f.query_fim(p, "nearest"), poses, min_queries)
                rows.append({"case": f"query_fim:{spec}", "value": t["median_us"], "unit": "us",
                             "p10": t["p10_us"], "p90": t["p90_us"]})
                rows.append({
                    "case": f"query_fim_batch:{spec}",
                    "value": _batch_us(lambda f=fld: f.query_fim_batch(positions, rotations, "nearest")),
                    "unit": "us",
                })
                for metric in ("det", "lmin", "trace"):
                    t = _time_calls(
                        lambda p, f=fld, m=metric: f.query_metric(p, m, "trilinear"), poses, min_queries
                    )
                    rows.append({"case": f"query_{metric}:{spec}:info", "value": t["median_us"],
                                 "unit": "us", "p10": t["p10_us"], "p90": t["p90_us"]})
            else:
                t = _time_calls(
                    lambda p, f=fld: f.query_metric(p, "trace", "trilinear"), poses, min_queries
                )
                rows.append({"case": f"query_trace:{spec}:trace", "value": t["median_us"],
                             "unit": "us", "p10": t["p10_us"], "p90": t["p90_us"]})

    if include_pc:
        t = _time_calls(lambda p: exact_pose_fim(p, points, camera, sigma), poses, min_queries)
        rows.append({"case": "query_fim:pc", "value": t["median_us"], "unit": "us",
                     "p10": t["p10_us"], "p90": t["p90_us"]})
        rows.append({
            "case": "query_fim_batch:pc",
            "value": _batch_us(lambda: exact_pose_fim_batch(rotations, positions, points, camera, sigma)),
            "unit": "us",
        })
        for metric in ("det", "lmin", "trace"):
            t = _time_calls(
                lambda p, m=metric: fim_metric(exact_pose_fim(p, points, camera, sigma), m),
                poses, min_queries,
            )
            rows.append({"case": f"query_{metric}:pc", "value": t["median_us"], "unit": "us",
                         "p10": t["p10_us"], "p90": t["p90_us"]})
    return rows


def run_bench_accuracy(
    scene: Scene,
    config: GridConfig,
    model_specs: list,
    n_poses: int = 200,
    seed: int = 0,
    camera: PinholeCamera | None = None,
    sigma: float = DEFAULT_SIGMA,
) -> list:
    """Relative Frobenius FIM error rows at voxel centers and random positions."""
    camera = camera or PinholeCamera.from_fov()
    rng = np.random.default_rng(seed)
    points = scene.positions

    vox = rng.integers(0, config.voxel_count, size=n_poses)
    center_poses = [
        Pose(random_rotation(rng), config.center_of(config.index3_of(v))) for v in vox
    ]
    random_poses = _random_poses(rng, config, n_poses)

    pose_sets = {"centers": center_poses, "random": random_poses}
    exact = {
        name: [exact_pose_fim(p, points, camera, sigma) for p in poses]
        for name, poses in pose_sets.items()
    }

    rows = []
    for spec in model_specs:
        model = parse_model(spec)
        fld = Field.build(scene, config, model, "info", sigma=sigma)
        for name, poses in pose_sets.items():
            errs = []
            for p, h in zip(poses, exact[name]):
                hn = np.linalg.norm(h)
                if hn == 0.0:
                    continue
                approx = fld.query_fim(p, "nearest")
                errs.append(np.linalg.norm(approx - h) / hn)
            errs = np.asarray(errs)
            rows.append({"case": f"err_{name}:{spec}", "value": float(errs.mean() * 100),
                         "unit": "%", "max": float(errs.max() * 100), "n": int(len(errs))})
    return rows


def run_optimal_views(
    scene: Scene,
    config: GridConfig,
    model_specs: list,
    n_positions: int = 200,
    yaw_samples: int = 72,
    metric: str = "det",
    seed: int = 0,
    camera: PinholeCamera | None = None,
    sigma: float = DEFAULT_SIGMA,
) -> list:
    """Angle between field-chosen and oracle-chosen best yaw per position."""
    camera = camera or PinholeCamera.from_fov()
    rng = np.random.default_rng(seed)
    points = scene.positions
    positions = _interior_positions(rng, config, n_positions)
    ygrid = np.linspace(-np.pi, np.pi, yaw_samples, endpoint=False)
    axes = yaw_axes(ygrid)
    mid = kernels.metric_id(metric)

    oracle_best = np.empty(n_positions)
    for i in range(n_positions):
        tiled = np.repeat(positions[i : i + 1], yaw_samples, axis=0)
        vals = kernels.pc_metric_yaw_batch(
            tiled, ygrid, points, camera.as_tuple(), sigma, R_CAM_MOUNT, mid
        )
        oracle_best[i] = ygrid[int(np.argmax(vals))]

    rows = []
    for spec in model_specs:
        model = parse_model(spec)
        fld = Field.build(scene, config, model, "info", sigma=sigma)
        diffs = np.empty(n_positions)
        for i in range(n_positions):
            tiled = np.repeat(positions[i : i + 1], yaw_samples, axis=0)
            vals, _ = fld.metric_axis_batch(tiled, axes, metric, "nearest")
            best = ygrid[int(np.argmax(vals))]
            diffs[i] = abs(wrap_angle(best - oracle_best[i]))
        deg = np.degrees(diffs)
        rows.append({"case": f"optview_{metric}:{spec}", "value": float(np.median(deg)),
                     "unit": "deg_median", "mean": float(deg.mean())})
    return rows


def _normalize01(v: np.ndarray) -> np.ndarray:
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def run_smoothness(
    scene: Scene,
    fld: Field,
    sweep: str = "pure_yaw_sweep",
    steps: int = 181,
    metric: str = "trace",
    position=None,
    camera: PinholeCamera | None = None,
    sigma: float = DEFAULT_SIGMA,
) -> tuple:
    """Normalized metric curves along a sweep; field vs exact oracle."""
    camera = camera or PinholeCamera.from_fov()
    config = fld.config
    points = scene.positions
    if sweep == "pure_yaw_sweep":
        pos = (
            np.asarray(position, dtype=np.float64)
            if position is not None
            else config.origin + config.extent / 2
        )
        yaws = np.linspace(-np.pi, np.pi, steps)
        positions = np.repeat(pos.reshape(1, 3), steps, axis=0)
    elif sweep == "pure_translation":
        lo = config.origin + config.voxel_size
        hi = config.origin + config.extent - config.voxel_size
        mid = config.origin + config.extent / 2
        ts = np.linspace(0.0, 1.0, steps)
        positions = np.empty((steps, 3))
        positions[:, 0] = lo[0] + ts * (hi[0] - lo[0])
        positions[:, 1] = mid[1]
        positions[:, 2] = mid[2]
        yaws = np.zeros(steps)
    else:
        raise FifieldError(f"unknown sweep {sweep!r}")

    fvals, ok = fld.metric_axis_batch(positions, yaw_axes(yaws), metric, "trilinear")
    fvals = np.where(ok, fvals, 0.0)
    ovals = kernels.pc_metric_yaw_batch(
        np.ascontiguousarray(positions), np.ascontiguousarray(yaws), points,
        camera.as_tuple(), sigma, R_CAM_MOUNT, kernels.metric_id(metric),
    )
    fn, on = _normalize01(fvals), _normalize01(ovals)
    rows = [
        {"case": f"max_jump_field:{metric}:{sweep}", "value": float(np.abs(np.diff(fn)).max()), "unit": ""},
        {"case": f"max_jump_oracle:{metric}:{sweep}", "value": float(np.abs(np.diff(on)).max()), "unit": ""},
    ]
    curves = {"field": fn.tolist(), "oracle": on.tolist()}
    return rows, curves


def run_backend_bench(
    scene: Scene,
    config: GridConfig,
    model_spec: str = "quad:0.5",
    n_poses: int = 200,
    min_queries: int = 1000,
    seed: int = 0,
    sigma: float = DEFAULT_SIGMA,
) -> list:
    """Build and query timings for every available kernel backend."""
    rows = []
    model = parse_model(model_spec)
    rng = np.random.default_rng(seed)
    poses = _random_poses(rng, config, n_poses)
    before = kernels.get_backend()
    try:
        for backend in kernels.available_backends():
            kernels.set_backend(backend)
            if backend == "numba":
                kernels.warmup()
            t0 = time.perf_counter()
            fld = Field.build(scene, config, model, "info", sigma=sigma)
            rows.append({"case": f"build:{model_spec}:{backend}",
                         "value": time.perf_counter() - t0, "unit": "s"})
            t = _time_calls(lambda p, f=fld: f.query_fim(p, "nearest"), poses, min_queries)
            rows.append({"case": f"query_fim:{model_spec}:{backend}",
                         "value": t["median_us"], "unit": "us", "p90": t["p90_us"]})
    finally:
        kernels.set_backend(before)
    return rows


# ──────────────────────────────────────────────────────────────────────
# planning plumbing
# ──────────────────────────────────────────────────────────────────────


@dataclass
class _PlanSetup:
    problem: dict
    scene: Scene
    world: ObstacleWorld
    start: PlanState
    goal: PlanState
    representation: object | None
    metric: str
    threshold: float
    exact_threshold: float
    camera: PinholeCamera
    sigma: float


def _load_problem(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def _state_from(d: dict) -> PlanState:
    return PlanState(np.asarray(d["position"], dtype=np.float64), float(d.get("yaw", 0.0)))


def _prepare_plan(args, need_info: bool) -> _PlanSetup:
    problem = _load_problem(args.problem)
    base = os.path.dirname(os.path.abspath(args.problem))
    scene_path = args.scene or problem.get("scene")
    if scene_path is None:
        raise FifieldError("problem file has no scene and --scene not given")
    if not os.path.isabs(scene_path):
        cand = os.path.join(base, scene_path)
        scene_path = cand if os.path.exists(cand) else scene_path
    scene = _load_scene(scene_path)

    camera = PinholeCamera.from_fov()
    sigma = float(problem.get("sigma", DEFAULT_SIGMA))
    world = ObstacleWorld.from_dict(problem.get("world", {}))
    metric = args.metric or problem.get("metric", "det")

    rep_kind = args.representation
    representation = None
    model = None
    if rep_kind == "field" and need_info:
        if args.field:
            fld = Field.deserialize(args.field)
            representation, model = fld, fld.model
        else:
            grid = parse_grid(args.grid or problem.get("grid", DEFAULT_GRID))
            model = parse_model(args.model[0] if args.model else problem.get("model", "gp:70"))
            representation = Field.build(scene, grid, model, "info", sigma=sigma)
    elif rep_kind == "exact" and need_info:
        representation = ExactInfoRepr(scene.positions, camera, sigma)

    threshold = 0.0
    exact_threshold = 0.0
    if need_info and rep_kind != "none":
        if "threshold" in problem:
            threshold = float(problem["threshold"])
            exact_threshold = threshold
        elif "threshold_spec" in problem:
            spec = LandmarkSpec.from_dict(problem["threshold_spec"])
            exact_threshold = metric_threshold(spec, metric, "exact", sigma)
            if isinstance(representation, Field):
                threshold = metric_threshold(
                    spec, metric, FieldRepr(model, "info"), sigma
                )
            else:
                threshold = exact_threshold

    return _PlanSetup(
        problem, scene, world, _state_from(problem["start"]), _state_from(problem["goal"]),
        representation, metric, threshold, exact_threshold, camera, sigma,
    )


def _below_threshold_fraction(setup: _PlanSetup, positions: np.ndarray, yaws: np.ndarray) -> float:
    """Exact-oracle check of sampled poses against the exact-derived threshold."""
    if setup.exact_threshold <= 0.0 or len(positions) == 0:
        return 0.0
    vals = kernels.pc_metric_yaw_batch(
        np.ascontiguousarray(positions), np.ascontiguousarray(yaws), setup.scene.positions,
        setup.camera.as_tuple(), setup.sigma, R_CAM_MOUNT, kernels.metric_id(setup.metric),
    )
    return float((vals < setup.exact_threshold).mean())


def _sample_path(path: list, spacing: float = 0.1):
    """Poses along a state polyline at fixed spacing (nominal 1 m/s, 0.1 s)."""
    all_p, all_y = [], []
    for a, b in zip(path[:-1], path[1:]):
        p, y = _edge_states(a.position, a.yaw, b.position, b.yaw, spacing)
        all_p.append(p[:-1])
        all_y.append(y[:-1])
    all_p.append(path[-1].position.reshape(1, 3))
    all_y.append(np.asarray([path[-1].yaw]))
    return np.vstack(all_p), np.concatenate(all_y)


# ──────────────────────────────────────────────────────────────────────
# subcommands
# ──────────────────────────────────────────────────────────────────────


def cmd_gen_scene(args) -> int:
    extent = _parse_vec3(args.extent)
    lo = np.asarray([-extent[0] / 2, -extent[1] / 2, 0.0])
    hi = np.asarray([extent[0] / 2, extent[1] / 2, extent[2]])
    if args.kind == "uniform":
        scene = gen_uniform(args.count, lo, hi, args.seed, args.view_dirs)
    else:
        scene = gen_clustered(
            args.count, args.clusters, args.spread, lo, hi, args.seed, args.view_dirs
        )
    scene.save(args.out)
    print(json.dumps({"scene": args.out, "count": scene.count,
                      "lo": lo.tolist(), "hi": hi.tolist(), "seed": args.seed}))
    return 0


def cmd_build(args) -> int:
    scene = _load_scene(args.scene)
    config = parse_grid(args.grid)
    model = parse_model(args.model[0] if args.model else "gp:70")
    match = Matchability(d_near=args.d_near, d_far=args.d_far)
    t0 = time.perf_counter()
    fld = Field.build(scene, config, model, args.factor, match, args.sigma, args.parallel)
    build_s = time.perf_counter() - t0
    fld.serialize(args.out)
    info = {
        "field": args.out,
        "build_s": build_s,
        "model": fld.model.spec_string(),
        "factor": args.factor,
        "memory": fld.memory_stats(),
        "file_bytes": os.path.getsize(args.out),
    }
    print(json.dumps(info, indent=1))
    return 0


def cmd_bench_timing(args) -> int:
    scene = _load_scene(args.scene)
    config = parse_grid(args.grid)
    specs = args.model or ["quad:0.5", "gp:70"]
    rows = run_bench_timing(
        scene, config, specs, args.n_poses, args.min_queries, args.seed, parallel=args.parallel
    )
    cfg = {"cmd": "bench-timing", "scene": args.scene, "grid": args.grid, "models": specs,
           "n_poses": args.n_poses, "min_queries": args.min_queries, "seed": args.seed,
           "landmarks": scene.count}
    _write_report(args.out, "bench-timing", cfg, rows)
    return 0


def cmd_bench_accuracy(args) -> int:
    scene = _load_scene(args.scene)
    config = parse_grid(args.grid)
    specs = args.model or ["quad:0.5", "gp:30", "gp:70"]
    rows = run_bench_accuracy(scene, config, specs, args.n_poses, args.seed)
    cfg = {"cmd": "bench-accuracy", "scene": args.scene, "grid": args.grid, "models": specs,
           "n_poses": args.n_poses, "seed": args.seed, "landmarks": scene.count}
    _write_report(args.out, "bench-accuracy", cfg, rows)
    return 0


def cmd_optimal_views(args) -> int:
    scene = _load_scene(args.scene)
    config = parse_grid(args.grid)
    specs = args.model or ["quad:0.5", "gp:70"]
    rows = run_optimal_views(
        scene, config, specs, args.n_positions, args.yaw_samples, args.metric or "det", args.seed
    )
    cfg = {"cmd": "optimal-views", "scene": args.scene, "grid": args.grid, "models": specs,
           "n_positions": args.n_positions, "yaw_samples": args.yaw_samples,
           "metric": args.metric or "det", "seed": args.seed}
    _write_report(args.out, "optimal-views", cfg, rows)
    return 0


def cmd_smoothness(args) -> int:
    scene = _load_scene(args.scene)
    if args.field:
        fld = Field.deserialize(args.field)
    else:
        config = parse_grid(args.grid)
        model = parse_model(args.model[0] if args.model else "gp:70")
        fld = Field.build(scene, config, model, "info")
    position = _parse_vec3(args.position) if args.position else None
    rows, curves = run_smoothness(
        scene, fld, args.trajectory, args.steps, args.metric or "trace", position
    )
    cfg = {"cmd": "smoothness", "scene": args.scene, "field": args.field, "grid": args.grid,
           "trajectory": args.trajectory, "steps": args.steps, "metric": args.metric or "trace"}
    _write_report(args.out, "smoothness", cfg, rows, {"curves": curves})
    return 0


def cmd_plan_rrt(args) -> int:
    setup = _prepare_plan(args, need_info=args.representation != "none")
    problem = setup.problem
    cfg = ValidityConfig(
        min_clearance=float(problem.get("min_clearance", 0.0)),
        info_metric=setup.metric,
        info_threshold=setup.threshold,
        representation=setup.representation,
    )
    rrt_args = problem.get("rrt", {})
    bounds = (problem["bounds"]["lo"], problem["bounds"]["hi"])
    config_echo = {"cmd": "plan-rrt", "problem": args.problem,
                   "representation": args.representation, "metric": setup.metric,
                   "threshold": setup.threshold, "seed": problem.get("seed", 0)}
    t0 = time.perf_counter()
    try:
        result = rrt_plan(
            setup.start, setup.goal, bounds, setup.world, cfg,
            weights=problem.get("weights"),
            time_budget=problem.get("time_budget"),
            max_iters=problem.get("max_iters"),
            seed=int(problem.get("seed", 0)),
            **rrt_args,
        )
    except NoPathError as e:
        result = getattr(e, "result", None)
        rows = [{"case": "no_path", "value": 1, "unit": ""}]
        if result is not None:
            rows.append({"case": "vertices", "value": result.vertices, "unit": ""})
            rows.append({"case": "edge_checks", "value": result.edge_checks, "unit": ""})
        _write_report(args.out, "plan-rrt", config_echo, rows)
        print(f"no path: {e}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - t0

    positions, yaws = _sample_path(result.path)
    frac = _below_threshold_fraction(setup, positions, yaws)
    rows = [
        {"case": "cost", "value": result.cost, "unit": ""},
        {"case": "vertices", "value": result.vertices, "unit": ""},
        {"case": "edge_checks", "value": result.edge_checks, "unit": ""},
        {"case": "plan_time", "value": elapsed, "unit": "s"},
        {"case": "vertices_per_s", "value": result.vertices / max(elapsed, 1e-9), "unit": "1/s"},
        {"case": "below_threshold_frac", "value": frac, "unit": ""},
    ]
    extra = {
        "path": [{"position": s.position.tolist(), "yaw": s.yaw} for s in result.path],
        "samples": {"positions": positions.tolist(), "yaws": yaws.tolist()},
    }
    _write_report(args.out, "plan-rrt", config_echo, rows, extra)
    if args.out:
        with open(args.out + ".growth.csv", "w") as f:
            f.write("time_s,vertices,edge_checks\n")
            for t, v, e in result.growth:
                f.write(f"{t},{v},{e}\n")
    return 0


def cmd_plan_traj(args) -> int:
    setup = _prepare_plan(args, need_info=args.representation != "none")
    problem = setup.problem
    mu = problem.get("mu", {})
    params = TrajCostParams(
        mu_d=float(mu.get("mu_d", 1.0)),
        mu_c=float(mu.get("mu_c", 1.0)),
        mu_v=float(mu.get("mu_v", 1.0)),
        eps_c=float(problem.get("eps_c", 0.5)),
        potential=(
            PotentialParams(setup.threshold, float(problem.get("k_q", 1.0)))
            if setup.threshold > 0
            else None
        ),
        metric=setup.metric,
    )
    init = fit_initial_trajectory(
        setup.start, setup.goal,
        duration=float(problem.get("duration", 10.0)),
        segments=int(problem.get("segments", 5)),
    )
    t0 = time.perf_counter()
    result = optimize_trajectory(
        init, setup.world, setup.representation, params,
        max_iters=int(problem.get("max_iters", 100)),
    )
    elapsed = time.perf_counter() - t0

    times, positions, yaws = result.trajectory.sample(0.1)
    frac = _below_threshold_fraction(setup, positions, yaws)
    breakdown = trajectory_cost(result.trajectory, setup.world, setup.representation, params)
    rows = [
        {"case": "initial_cost", "value": result.initial_cost, "unit": ""},
        {"case": "final_cost", "value": result.cost, "unit": ""},
        {"case": "iterations", "value": result.iterations, "unit": ""},
        {"case": "opt_time", "value": elapsed, "unit": "s"},
        {"case": "below_threshold_frac", "value": frac, "unit": ""},
        {"case": "dynamic", "value": breakdown["dynamic"], "unit": ""},
        {"case": "collision", "value": breakdown["collision"], "unit": ""},
        {"case": "information", "value": breakdown["information"], "unit": ""},
    ]
    config_echo = {"cmd": "plan-traj", "problem": args.problem,
                   "representation": args.representation, "metric": setup.metric,
                   "threshold": setup.threshold, "mu": mu}
    extra = {"samples": {"times": times.tolist(), "positions": positions.tolist(),
                         "yaws": yaws.tolist()}}
    _write_report(args.out, "plan-traj", config_echo, rows, extra)
    if args.out:
        with open(args.out + ".iters.csv", "w") as f:
            f.write("iteration,cost,time_s\n")
            for it, c, t in result.history:
                f.write(f"{it},{c},{t}\n")
    return 0


def cmd_inspect(args) -> int:
    out = {}
    if args.field:
        fld = Field.deserialize(args.field)
        out["field"] = {
            "factor_kind": fld.factor_kind,
            "model": fld.model.spec_string(),
            "sigma": fld.sigma,
            "grid": {
                "origin": fld.config.origin.tolist(),
                "voxel_size": fld.config.voxel_size,
                "dims": fld.config.dims.tolist(),
            },
            "occupied_voxels": int(fld.factors.shape[0]),
            "memory": fld.memory_stats(),
            "file_bytes": os.path.getsize(args.field),
        }
    if args.scene:
        scene = _load_scene(args.scene)
        out["scene"] = {
            "count": scene.count,
            "lo": scene.positions.min(axis=0).tolist() if scene.count else None,
            "hi": scene.positions.max(axis=0).tolist() if scene.count else None,
            "has_view_dirs": scene.view_dirs is not None,
        }
    if not out:
        raise FifieldError("inspect needs --field and/or --scene")
    print(json.dumps(out, indent=1))
    return 0


def cmd_bench_backends(args) -> int:
    scene = _load_scene(args.scene)
    config = parse_grid(args.grid)
    spec = args.model[0] if args.model else "quad:0.5"
    rows = run_backend_bench(scene, config, spec, args.n_poses, args.min_queries, args.seed)
    cfg = {"cmd": "bench-backends", "scene": args.scene, "grid": args.grid, "model": spec,
           "n_poses": args.n_poses, "seed": args.seed,
           "backends": list(kernels.available_backends())}
    _write_report(args.out, "bench-backends", cfg, rows)
    return 0


# ──────────────────────────────────────────────────────────────────────
# argument wiring
# ──────────────────────────────────────────────────────────────────────


def _add_common(p: argparse.ArgumentParser, *names) -> None:
    if "scene" in names:
        p.add_argument("--scene", help="scene file (JSON lines)")
    if "field" in names:
        p.add_argument("--field", help="serialized field file")
    if "grid" in names:
        p.add_argument("--grid", default=DEFAULT_GRID, help='grid "ox,oy,oz:vs:nx,ny,nz"')
    if "model" in names:
        p.add_argument("--model", action="append",
                       help="visibility model quad:v_alpha or gp:n_s (repeatable)")
    if "factor" in names:
        p.add_argument("--factor", choices=["info", "trace"], default="info")
    if "metric" in names:
        p.add_argument("--metric", choices=["det", "lmin", "trace"], default=None)
    if "seed" in names:
        p.add_argument("--seed", type=int, default=0)
    if "out" in names:
        p.add_argument("--out", help="output prefix (writes <out>.csv and <out>.json)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fifield", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="generate a random landmark scene")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--extent", default="10,10,5", help='box "ex,ey,ez"; x,y centered, z from 0')
    p.add_argument("--kind", choices=["uniform", "clustered"], default="uniform")
    p.add_argument("--clusters", type=int, default=6)
    p.add_argument("--spread", type=float, default=0.6)
    p.add_argument("--view-dirs", action="store_true")
    _add_common(p, "seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("build", help="build a field and write it to disk")
    _add_common(p, "scene", "grid", "model", "factor")
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    p.add_argument("--d-near", type=float, default=None)
    p.add_argument("--d-far", type=float, default=None)
    p.add_argument("--parallel", action="store_true", help="parallel voxel loop for the build")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("bench-timing", help="build/query timing per model vs point cloud")
    _add_common(p, "scene", "grid", "model", "seed", "out")
    p.add_argument("--n-poses", type=int, default=200)
    p.add_argument("--min-queries", type=int, default=1000)
    p.add_argument("--parallel", action="store_true")
    p.set_defaults(func=cmd_bench_timing)

    p = sub.add_parser("bench-accuracy", help="FIM error vs exact, per model")
    _add_common(p, "scene", "grid", "model", "seed", "out")
    p.add_argument("--n-poses", type=int, default=200)
    p.set_defaults(func=cmd_bench_accuracy)

    p = sub.add_parser("optimal-views", help="best-yaw agreement with the exact oracle")
    _add_common(p, "scene", "grid", "model", "metric", "seed", "out")
    p.add_argument("--n-positions", type=int, default=200)
    p.add_argument("--yaw-samples", type=int, default=72)
    p.set_defaults(func=cmd_optimal_views)

    p = sub.add_parser("smoothness", help="metric smoothness along a sweep")
    _add_common(p, "scene", "field", "grid", "model", "metric", "out")
    p.add_argument("--trajectory", choices=["pure_yaw_sweep", "pure_translation"],
                   default="pure_yaw_sweep")
    p.add_argument("--steps", type=int, default=181)
    p.add_argument("--position", help='fixed position "x,y,z" for the yaw sweep')
    p.set_defaults(func=cmd_smoothness)

    p = sub.add_parser("plan-rrt", help="information-gated RRT* from a problem file")
    p.add_argument("--problem", required=True)
    p.add_argument("--representation", choices=["field", "exact", "none"], default="field")
    _add_common(p, "scene", "field", "grid", "model", "metric", "out")
    p.set_defaults(func=cmd_plan_rrt)

    p = sub.add_parser("plan-traj", help="information-aware trajectory optimization")
    p.add_argument("--problem", required=True)
    p.add_argument("--representation", choices=["field", "exact", "none"], default="field")
    _add_common(p, "scene", "field", "grid", "model", "metric", "out")
    p.set_defaults(func=cmd_plan_traj)

    p = sub.add_parser("inspect", help="summarize a field or scene file")
    _add_common(p, "field", "scene")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bench-backends", help="compare compiled vs pure-numpy kernels")
    _add_common(p, "scene", "grid", "model", "seed", "out")
    p.add_argument("--n-poses", type=int, default=200)
    p.add_argument("--min-queries", type=int, default=1000)
    p.set_defaults(func=cmd_bench_backends)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoPathError as e:
        print(f"no path: {e}", file=sys.stderr)
        return 2
    except (FifieldError, FileNotFoundError, OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
