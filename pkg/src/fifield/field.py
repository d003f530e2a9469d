"""Voxel grid of positional information factors with constant-time queries.

Build: at every voxel center c, accumulate over contributing landmarks i
    info factor:  block[k] = sum_i v^p_i[k] * I_i(c)      (N_v 6x6 blocks)
    trace factor: vec[k]   = sum_i v^p_i[k] * Tr(I_i(c))  (N_v scalars)

Query: contract the stored factor with the rotation vector v^r(R); the cost
depends only on N_v, never on the landmark count. "nearest" reads the
containing voxel; "trilinear" blends the 8 surrounding voxel centers
(factor blocks for raw FIM queries, metric scalars for metric queries).
Voxels without contributing landmarks are absent from the map and read as
exact zeros. Positions outside the coverage raise OutOfField.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    BadMagic,
    EmptyGrid,
    OutOfField,
    TruncatedFile,
    VersionMismatch,
    WrongFactorKind,
)
from .geometry import Pose
from .fim import DEFAULT_SIGMA
from .visibility import GpVisibility, QuadraticVisibility, SeKernelParams, VisibilityModel

MAGIC = b"FIF1"
FORMAT_VERSION = 1

_FACTOR_CODES = {"info": 0, "trace": 1}
_FACTOR_NAMES = {v: k for k, v in _FACTOR_CODES.items()}
_MODEL_QUAD = 1
_MODEL_GP = 2

_MODES = ("nearest", "trilinear")


@dataclass(frozen=True)
class GridConfig:
    """Axis-aligned voxel grid: min corner, voxel edge length, voxel counts."""

    origin: np.ndarray
    voxel_size: float
    dims: np.ndarray

    def __post_init__(self) -> None:
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3).copy()
        dims = np.asarray(self.dims, dtype=np.int64).reshape(3).copy()
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if (dims < 1).any():
            raise EmptyGrid(f"dims {dims.tolist()} contain an empty axis")
        origin.flags.writeable = False
        dims.flags.writeable = False
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "voxel_size", float(self.voxel_size))

    @property
    def voxel_count(self) -> int:
        return int(np.prod(self.dims))

    @property
    def extent(self) -> np.ndarray:
        return self.dims * self.voxel_size

    def centers(self) -> np.ndarray:
        """(V, 3) voxel centers in linear-index order (x-major, z-minor)."""
        nx, ny, nz = (int(d) for d in self.dims)
        ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        idx = np.stack([ix, iy, iz], axis=-1).reshape(-1, 3)
        return self.origin + (idx + 0.5) * self.voxel_size

    def linear_index(self, index3: np.ndarray) -> np.ndarray:
        i = np.asarray(index3, dtype=np.int64)
        return (i[..., 0] * self.dims[1] + i[..., 1]) * self.dims[2] + i[..., 2]

    def index3_of(self, linear: np.ndarray) -> np.ndarray:
        linear = np.asarray(linear, dtype=np.int64)
        iz = linear % self.dims[2]
        rest = linear // self.dims[2]
        iy = rest % self.dims[1]
        ix = rest // self.dims[1]
        return np.stack([ix, iy, iz], axis=-1)

    def contains(self, position: np.ndarray) -> bool:
        g = (np.asarray(position, dtype=np.float64) - self.origin) / self.voxel_size
        return bool((g >= 0).all() and (g < self.dims).all())

    def center_of(self, index3) -> np.ndarray:
        return self.origin + (np.asarray(index3, dtype=np.float64) + 0.5) * self.voxel_size


@dataclass(frozen=True)
class Matchability:
    """Which landmarks contribute to a voxel's factor.

    All constraints optional; the default accepts every (voxel, landmark)
    pair. view_cone_beta gates on the angle between the voxel->landmark
    direction and the landmark's stored mean view direction. occluders is
    an obstacle world whose primitives block line of sight. predicate is a
    plain callable(center, landmark_position) -> bool escape hatch
    (evaluated pairwise in Python; slow for large builds).
    """

    d_near: float | None = None
    d_far: float | None = None
    view_cone_beta: float | None = None
    occluders: object | None = None
    predicate: object | None = None

    @property
    def is_trivial(self) -> bool:
        return (
            self.d_near is None
            and self.d_far is None
            and self.view_cone_beta is None
            and self.occluders is None
            and self.predicate is None
        )

    def describe(self) -> str:
        if self.is_trivial:
            return "always"
        parts = []
        if self.d_near is not None or self.d_far is not None:
            parts.append(f"range[{self.d_near},{self.d_far}]")
        if self.view_cone_beta is not None:
            parts.append(f"viewcone[{self.view_cone_beta:.4f}]")
        if self.occluders is not None:
            parts.append("occlusion")
        if self.predicate is not None:
            parts.append("custom")
        return "+".join(parts)

    def mask(
        self,
        centers: np.ndarray,
        points: np.ndarray,
        view_dirs: np.ndarray | None = None,
    ) -> np.ndarray | None:
        """(V, N) uint8 acceptance mask, or None when everything matches."""
        if self.is_trivial:
            return None
        d = points[None, :, :] - centers[:, None, :]  # (V, N, 3)
        dist = np.linalg.norm(d, axis=2)
        ok = np.ones(dist.shape, dtype=bool)
        if self.d_near is not None:
            ok &= dist >= self.d_near
        if self.d_far is not None:
            ok &= dist <= self.d_far
        if self.view_cone_beta is not None:
            if view_dirs is None:
                raise ValueError("view_cone_beta requires landmark view directions")
            safe = np.maximum(dist, 1e-12)
            # angle between voxel->landmark direction and the mean view direction
            cosang = np.einsum("vnk,nk->vn", d / safe[..., None], view_dirs)
            ok &= cosang >= np.cos(self.view_cone_beta)
        if self.occluders is not None:
            from .world import segment_blocked

            for v in range(centers.shape[0]):
                blocked = segment_blocked(self.occluders, centers[v], points)
                ok[v] &= ~blocked
        if self.predicate is not None:
            for v in range(centers.shape[0]):
                for n in range(points.shape[0]):
                    if ok[v, n] and not self.predicate(centers[v], points[n]):
                        ok[v, n] = False
        return ok.astype(np.uint8)


ALWAYS_MATCH = Matchability()


def _as_points(landmarks) -> tuple[np.ndarray, np.ndarray | None]:
    """Accept a Scene, an (N,3) array, or a single 3-vector."""
    view_dirs = getattr(landmarks, "view_dirs", None)
    positions = getattr(landmarks, "positions", landmarks)
    pts = np.ascontiguousarray(np.asarray(positions, dtype=np.float64).reshape(-1, 3))
    if view_dirs is not None:
        view_dirs = np.ascontiguousarray(np.asarray(view_dirs, dtype=np.float64).reshape(-1, 3))
    return pts, view_dirs


class Field:
    """Voxel map of positional factors for one visibility model."""

    def __init__(
        self,
        config: GridConfig,
        model: VisibilityModel,
        factor_kind: str,
        sigma: float,
        slots: np.ndarray,
        factors: np.ndarray,
        occupied_index3: np.ndarray,
        matchability: Matchability = ALWAYS_MATCH,
    ):
        if factor_kind not in _FACTOR_CODES:
            raise ValueError(f"factor_kind must be one of {tuple(_FACTOR_CODES)}")
        self.config = config
        self.model = model
        self.factor_kind = factor_kind
        self.sigma = float(sigma)
        self.matchability = matchability
        self.slots = slots
        self.factors = factors
        self.occupied_index3 = occupied_index3
        self._dims = np.ascontiguousarray(config.dims, dtype=np.int64)
        self._origin = np.ascontiguousarray(config.origin, dtype=np.float64)
        self._vsize = float(config.voxel_size)
        self._is_info = factor_kind == "info"
        self._mkind, self._margs = self._model_query_args()

    # ── construction ────────────────────────────────────────────────

    @property
    def row_width(self) -> int:
        return self.model.n_v * (36 if self.factor_kind == "info" else 1)

    @staticmethod
    def build(
        landmarks,
        config: GridConfig,
        model: VisibilityModel,
        factor_kind: str = "info",
        matchability: Matchability = ALWAYS_MATCH,
        sigma: float = DEFAULT_SIGMA,
        parallel: bool = False,
    ) -> "Field":
        if config.voxel_count == 0:
            raise EmptyGrid("grid has zero voxels")
        if factor_kind not in _FACTOR_CODES:
            raise ValueError(f"factor_kind must be one of {tuple(_FACTOR_CODES)}")
        points, view_dirs = _as_points(landmarks)
        centers = config.centers()
        want_trace = factor_kind == "trace"
        width = model.n_v * (1 if want_trace else 36)

        if points.shape[0] == 0:
            slots = np.full(config.voxel_count, -1, dtype=np.int32)
            factors = np.zeros((0, width))
            occ3 = np.zeros((0, 3), dtype=np.int32)
            return Field(config, model, factor_kind, sigma, slots, factors, occ3, matchability)

        mask = matchability.mask(centers, points, view_dirs)
        if mask is None:
            occupied = np.ones(config.voxel_count, dtype=bool)
            sub_centers, sub_mask = centers, None
        else:
            occupied = mask.any(axis=1)
            sub_centers = np.ascontiguousarray(centers[occupied])
            sub_mask = np.ascontiguousarray(mask[occupied])

        factors = _build_rows(sub_centers, points, sigma, model, want_trace, sub_mask, parallel)
        slots = np.full(config.voxel_count, -1, dtype=np.int32)
        lin = np.nonzero(occupied)[0]
        slots[lin] = np.arange(lin.size, dtype=np.int32)
        occ3 = config.index3_of(lin).astype(np.int32)
        return Field(config, model, factor_kind, sigma, slots, factors, occ3, matchability)

    # ── queries ─────────────────────────────────────────────────────

    def _check_mode(self, mode: str) -> bool:
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        return mode == "trilinear"

    def query_factor(self, position: np.ndarray, mode: str = "nearest") -> np.ndarray:
        """Factor at a position: (n_v, 6, 6) blocks for info, (n_v,) for trace.

        Trilinear mode returns the weighted blend of the 8 surrounding
        voxel-center factors.
        """
        trilinear = self._check_mode(mode)
        pos = np.asarray(position, dtype=np.float64)
        if trilinear:
            corners = kernels._np_trilinear_corners(self._origin, self._vsize, self._dims, pos)
            if corners is None:
                raise OutOfField(f"position {pos.tolist()} lacks 8 interpolation neighbors")
            idx, wts = corners
            out = np.zeros(self.factors.shape[1])
            for j in range(8):
                row = self.slots[idx[j]]
                if row >= 0 and wts[j] != 0.0:
                    out += wts[j] * self.factors[row]
        else:
            lin = kernels._np_locate_nearest(self._origin, self._vsize, self._dims, pos)
            if lin < 0:
                raise OutOfField(f"position {pos.tolist()} outside grid")
            row = self.slots[lin]
            out = self.factors[row].copy() if row >= 0 else np.zeros(self.factors.shape[1])
        if self.factor_kind == "info":
            return out.reshape(self.model.n_v, 6, 6)
        return out

    def _model_query_args(self):
        m = self.model
        if isinstance(m, QuadraticVisibility):
            return "quad", (m.k2, m.k1, m.k0)
        if isinstance(m, GpVisibility):
            return "gp", (m.samples, m.params.sigma2, m.params.length_scale)
        return "generic", ()

    def query_fim(self, pose: Pose, mode: str = "nearest") -> np.ndarray:
        """6x6 FIM at a pose; requires an info field."""
        if not self._is_info:
            raise WrongFactorKind("FIM query requires an info-factor field")
        if mode == "nearest":
            trilinear = False
        elif mode == "trilinear":
            trilinear = True
        else:
            raise ValueError(f"mode must be one of {_MODES}")
        pos = pose.translation
        z = pose.rotation[:, 2]
        kind = self._mkind
        if kind == "quad":
            fim, status = kernels.query_fim_quad(
                self.slots, self.factors, self._origin, self._vsize, self._dims,
                pos, z, *self._margs, trilinear,
            )
        elif kind == "gp":
            fim, status = kernels.query_fim_gp(
                self.slots, self.factors, self._origin, self._vsize, self._dims,
                pos, z, *self._margs, trilinear,
            )
        else:
            vr = self.model.rotation_vector_from_axis(z)
            fim, status = kernels.query_fim_vr(
                self.slots, self.factors, self._origin, self._vsize, self._dims, pos, vr, trilinear
            )
        if status != kernels.STATUS_OK:
            raise OutOfField(f"position {pos.tolist()} outside field coverage")
        return fim

    def query_fim_batch(
        self, positions: np.ndarray, rotations: np.ndarray, mode: str = "nearest"
    ) -> tuple[np.ndarray, np.ndarray]:
        """FIMs for Q poses in one kernel call.

        Returns (fims, in_field): (Q,6,6) and a (Q,) bool mask; positions
        outside coverage get a zero FIM instead of raising.
        """
        if not self._is_info:
            raise WrongFactorKind("FIM query requires an info-factor field")
        trilinear = self._check_mode(mode)
        positions = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
        rotations = np.asarray(rotations, dtype=np.float64).reshape(-1, 3, 3)
        axes = np.ascontiguousarray(rotations[:, :, 2])
        kind = self._mkind
        if kind == "quad":
            fims, status = kernels.query_fim_batch_quad(
                self.slots, self.factors, self._origin, self._vsize, self._dims,
                positions, axes, *self._margs, trilinear,
            )
        elif kind == "gp":
            fims, status = kernels.query_fim_batch_gp(
                self.slots, self.factors, self._origin, self._vsize, self._dims,
                positions, axes, *self._margs, trilinear,
            )
        else:
            fims = np.empty((positions.shape[0], 6, 6))
            status = np.empty(positions.shape[0], dtype=np.int64)
            for i in range(positions.shape[0]):
                vr = self.model.rotation_vector_from_axis(axes[i])
                fims[i], status[i] = kernels.query_fim_vr(
                    self.slots, self.factors, self._origin, self._vsize, self._dims,
                    positions[i], vr, trilinear,
                )
        return fims, status == kernels.STATUS_OK

    def query_metric(self, pose: Pose, metric: str = "det", mode: str = "nearest") -> float:
        """Scalar information metric at a pose.

        Trilinear mode evaluates the metric at each surrounding voxel and
        blends the scalars. Trace works on both factor kinds; det/lmin
        need the info kind.
        """
        is_trace_field = not self._is_info
        if metric not in ("det", "lmin", "trace"):
            raise ValueError(f"unknown metric {metric!r}")
        if is_trace_field and metric != "trace":
            raise WrongFactorKind("det/lmin require an info-factor field")
        trilinear = self._check_mode(mode)
        mid = kernels.metric_id(metric)
        kind = self._mkind
        pos = pose.translation
        z = pose.rotation[:, 2]
        if kind == "quad":
            val, status = kernels.query_metric_quad(
                self.slots, self.factors, self._origin, self._vsize, self._dims,
                pos, z, *self._margs, mid, is_trace_field, trilinear,
            )
        elif kind == "gp":
            val, status = kernels.query_metric_gp(
                self.slots, self.factors, self._origin, self._vsize, self._dims,
                pos, z, *self._margs, mid, is_trace_field, trilinear,
            )
        else:
            vr = self.model.rotation_vector_from_axis(z)
            val, status = kernels.query_metric_vr(
                self.slots, self.factors, self._origin, self._vsize, self._dims,
                pos, vr, mid, is_trace_field, trilinear,
            )
        if status != kernels.STATUS_OK:
            raise OutOfField(f"position {pos.tolist()} outside field coverage")
        return float(val)

    def metric_axis_batch(
        self,
        positions: np.ndarray,
        axes: np.ndarray,
        metric: str = "det",
        mode: str = "nearest",
    ) -> tuple[np.ndarray, np.ndarray]:
        """Metric at many (position, optical axis) pairs.

        Returns (values, in_field) where in_field is False for positions
        outside coverage (their value is 0).
        """
        is_trace_field = not self._is_info
        if is_trace_field and metric != "trace":
            raise WrongFactorKind("det/lmin require an info-factor field")
        trilinear = self._check_mode(mode)
        mid = kernels.metric_id(metric)
        kind = self._mkind
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        axes = np.ascontiguousarray(axes, dtype=np.float64)
        if kind == "quad":
            vals, stat = kernels.field_metric_yaw_batch_quad(
                self.slots, self.factors, self._origin, self._vsize, self._dims,
                positions, axes, *self._margs, mid, is_trace_field, trilinear,
            )
        elif kind == "gp":
            vals, stat = kernels.field_metric_yaw_batch_gp(
                self.slots, self.factors, self._origin, self._vsize, self._dims,
                positions, axes, *self._margs, mid, is_trace_field, trilinear,
            )
        else:
            vals = np.empty(positions.shape[0])
            stat = np.empty(positions.shape[0], dtype=np.int64)
            for i in range(positions.shape[0]):
                vr = self.model.rotation_vector_from_axis(axes[i])
                vals[i], stat[i] = kernels.query_metric_vr(
                    self.slots, self.factors, self._origin, self._vsize, self._dims,
                    positions[i], vr, mid, is_trace_field, trilinear,
                )
        return vals, stat == kernels.STATUS_OK

    # ── incremental updates ─────────────────────────────────────────

    def _increment(self, points: np.ndarray, view_dirs: np.ndarray | None, sign: float) -> None:
        centers = self.config.centers()
        mask = self.matchability.mask(centers, points, view_dirs)
        want_trace = self.factor_kind == "trace"
        if mask is None:
            touched = np.ones(self.config.voxel_count, dtype=bool)
            sub_centers, sub_mask = centers, None
        else:
            touched = mask.any(axis=1)
            if not touched.any():
                return
            sub_centers = np.ascontiguousarray(centers[touched])
            sub_mask = np.ascontiguousarray(mask[touched])
        inc = _build_rows(sub_centers, points, self.sigma, self.model, want_trace, sub_mask, False)

        lin_touched = np.nonzero(touched)[0]
        rows = self.slots[lin_touched]
        missing = rows < 0
        if missing.any():
            # newly occupied voxels get appended rows
            new_lin = lin_touched[missing]
            start = self.factors.shape[0]
            self.slots[new_lin] = np.arange(start, start + new_lin.size, dtype=np.int32)
            self.factors = np.vstack([self.factors, np.zeros((new_lin.size, self.factors.shape[1]))])
            self.occupied_index3 = np.vstack(
                [self.occupied_index3, self.config.index3_of(new_lin).astype(np.int32)]
            )
            rows = self.slots[lin_touched]
        self.factors[rows] += sign * inc

    def add_landmarks(self, landmarks, view_dirs: np.ndarray | None = None) -> None:
        points, vd = _as_points(landmarks)
        self._increment(points, vd if vd is not None else view_dirs, +1.0)

    def remove_landmarks(self, landmarks, view_dirs: np.ndarray | None = None) -> None:
        points, vd = _as_points(landmarks)
        self._increment(points, vd if vd is not None else view_dirs, -1.0)

    # spec-level single-landmark aliases
    add_landmark = add_landmarks
    remove_landmark = remove_landmarks

    def update_landmark(self, old, new) -> None:
        self.remove_landmarks(old)
        self.add_landmarks(new)

    # ── accounting and serialization ────────────────────────────────

    def memory_stats(self) -> dict:
        scalars = self.model.n_v * (36 if self.factor_kind == "info" else 1)
        rows = self.factors.shape[0]
        bytes_factors = rows * scalars * 8
        bytes_index = self.slots.nbytes + self.occupied_index3.nbytes
        return {
            "voxel_count": rows,
            "grid_voxels": self.config.voxel_count,
            "n_v": self.model.n_v,
            "scalars_per_voxel": scalars,
            "bytes_factors": bytes_factors,
            "bytes_factors_float32": rows * scalars * 4,
            "bytes_index": bytes_index,
            "bytes_total": bytes_factors + bytes_index,
        }

    def serialize(self, path) -> None:
        m = self.model
        head = bytearray()
        head += MAGIC
        head += struct.pack("<I", FORMAT_VERSION)
        head += struct.pack("<B", _FACTOR_CODES[self.factor_kind])
        if isinstance(m, QuadraticVisibility):
            head += struct.pack("<B", _MODEL_QUAD)
            head += struct.pack("<d", m.alpha)
            head += struct.pack("<3d", m.k2, m.k1, m.k0)
        elif isinstance(m, GpVisibility):
            head += struct.pack("<B", _MODEL_GP)
            head += struct.pack("<d", m.alpha)
            head += struct.pack("<I", m.n_v)
            head += np.ascontiguousarray(m.samples, dtype="<f8").tobytes()
            head += struct.pack("<4d", m.params.sigma2, m.params.length_scale, m.params.jitter, m.k_s)
        else:
            raise ValueError(f"model kind {m.kind!r} has no file representation")
        head += struct.pack("<d", self.sigma)
        head += np.ascontiguousarray(self.config.origin, dtype="<f8").tobytes()
        head += struct.pack("<d", self.config.voxel_size)
        head += struct.pack("<3I", *(int(d) for d in self.config.dims))
        rows = self.factors.shape[0]
        head += struct.pack("<Q", rows)

        order = np.argsort(self.config.linear_index(self.occupied_index3))
        with open(path, "wb") as f:
            f.write(bytes(head))
            for r in order:
                f.write(struct.pack("<3i", *(int(v) for v in self.occupied_index3[r])))
                f.write(np.ascontiguousarray(self.factors[r], dtype="<f8").tobytes())

    @staticmethod
    def deserialize(path, expect_kind: str | None = None) -> "Field":
        with open(path, "rb") as f:
            data = f.read()
        off = 0

        def take(n: int) -> bytes:
            nonlocal off
            if off + n > len(data):
                raise TruncatedFile(f"needed {n} bytes at offset {off}, file has {len(data)}")
            chunk = data[off : off + n]
            off += n
            return chunk

        if take(4) != MAGIC:
            raise BadMagic("not a field file (bad magic)")
        (version,) = struct.unpack("<I", take(4))
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"file version {version}, supported {FORMAT_VERSION}")
        (kind_code,) = struct.unpack("<B", take(1))
        if kind_code not in _FACTOR_NAMES:
            raise TruncatedFile(f"unknown factor kind code {kind_code}")
        factor_kind = _FACTOR_NAMES[kind_code]
        if expect_kind is not None and factor_kind != expect_kind:
            raise WrongFactorKind(f"file holds {factor_kind} factors, expected {expect_kind}")
        (model_code,) = struct.unpack("<B", take(1))
        if model_code == _MODEL_QUAD:
            (alpha,) = struct.unpack("<d", take(8))
            k2, k1, k0 = struct.unpack("<3d", take(24))
            model: VisibilityModel = QuadraticVisibility(alpha, k2, k1, k0)
        elif model_code == _MODEL_GP:
            (alpha,) = struct.unpack("<d", take(8))
            (n_s,) = struct.unpack("<I", take(4))
            samples = np.frombuffer(take(24 * n_s), dtype="<f8").reshape(n_s, 3).copy()
            sigma2, ell, jitter, k_s = struct.unpack("<4d", take(32))
            from .visibility import gp_build

            model = gp_build(samples, SeKernelParams(sigma2, ell, jitter), alpha, k_s)
        else:
            raise TruncatedFile(f"unknown model kind code {model_code}")
        (sigma,) = struct.unpack("<d", take(8))
        origin = np.frombuffer(take(24), dtype="<f8").copy()
        (voxel_size,) = struct.unpack("<d", take(8))
        dims = struct.unpack("<3I", take(12))
        (rows,) = struct.unpack("<Q", take(8))

        config = GridConfig(origin, voxel_size, np.asarray(dims, dtype=np.int64))
        width = model.n_v * (36 if factor_kind == "info" else 1)
        occ3 = np.empty((rows, 3), dtype=np.int32)
        factors = np.empty((rows, width))
        for r in range(rows):
            occ3[r] = struct.unpack("<3i", take(12))
            factors[r] = np.frombuffer(take(width * 8), dtype="<f8")
        if (occ3 < 0).any() or (occ3 >= np.asarray(dims)).any():
            raise TruncatedFile("voxel index outside grid")
        slots = np.full(config.voxel_count, -1, dtype=np.int32)
        slots[config.linear_index(occ3)] = np.arange(rows, dtype=np.int32)
        return Field(config, model, factor_kind, sigma, slots, factors, occ3)


def _build_rows(centers, points, sigma, model, want_trace, mask, parallel):
    if isinstance(model, QuadraticVisibility):
        return kernels.build_quad_factors(
            centers, points, sigma, model.k2, model.k1, model.k0, want_trace, mask, parallel
        )
    if isinstance(model, GpVisibility):
        return kernels.build_gp_factors(
            centers, points, sigma, model.samples, model.kinv,
            model.k_s, float(np.cos(model.alpha)), want_trace, mask, parallel,
        )
    # generic separable model: accumulate through the public vector API
    width = model.n_v * (1 if want_trace else 36)
    out = np.zeros((centers.shape[0], width))
    for v in range(centers.shape[0]):
        idx = np.arange(points.shape[0]) if mask is None else np.nonzero(mask[v])[0]
        if idx.size == 0:
            continue
        pts = points[idx]
        vp = model.position_vectors(centers[v], pts)
        i6 = kernels.landmark_fims(pts, centers[v], sigma).reshape(-1, 36)
        if want_trace:
            tr = i6[:, [0, 7, 14, 21, 28, 35]].sum(axis=1)
            out[v] = vp.T @ tr
        else:
            out[v] = (vp.T @ i6).reshape(-1)
    return out


def build(landmarks, config, model, factor_kind="info", matchability=ALWAYS_MATCH,
          sigma=DEFAULT_SIGMA, parallel=False) -> Field:
    """Module-level alias for Field.build."""
    return Field.build(landmarks, config, model, factor_kind, matchability, sigma, parallel)
