"""Landmark scenes: position arrays with optional mean view directions.

File format is JSON lines, one landmark per line:
    {"id": 0, "p": [x, y, z]}
    {"id": 1, "p": [x, y, z], "view_dir": [ux, uy, uz]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class Scene:
    positions: np.ndarray
    view_dirs: np.ndarray | None = None
    ids: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if self.view_dirs is not None:
            self.view_dirs = np.ascontiguousarray(self.view_dirs, dtype=np.float64).reshape(-1, 3)
            if self.view_dirs.shape[0] != self.positions.shape[0]:
                raise ValueError("view_dirs count does not match positions")
        if self.ids is None:
            self.ids = np.arange(self.positions.shape[0], dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def save(self, path) -> None:
        with open(path, "w") as f:
            for i in range(self.count):
                rec = {"id": int(self.ids[i]), "p": self.positions[i].tolist()}
                if self.view_dirs is not None:
                    rec["view_dir"] = self.view_dirs[i].tolist()
                f.write(json.dumps(rec) + "\n")

    @staticmethod
    def load(path) -> "Scene":
        ids, pts, dirs = [], [], []
        any_dir = False
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                ids.append(int(rec["id"]))
                pts.append([float(v) for v in rec["p"]])
                vd = rec.get("view_dir")
                if vd is not None:
                    any_dir = True
                    dirs.append([float(v) for v in vd])
                else:
                    dirs.append([0.0, 0.0, 0.0])
        positions = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        view_dirs = np.asarray(dirs, dtype=np.float64) if any_dir else None
        return Scene(positions, view_dirs, np.asarray(ids, dtype=np.int64))


def _random_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def gen_uniform(
    count: int,
    lo=(-5.0, -5.0, 0.0),
    hi=(5.0, 5.0, 5.0),
    seed: int = 0,
    with_view_dirs: bool = False,
) -> Scene:
    """Landmarks uniform in an axis-aligned box."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    positions = rng.uniform(lo, hi, size=(count, 3))
    dirs = _random_unit(rng, count) if with_view_dirs else None
    return Scene(positions, dirs)


def gen_clustered(
    count: int,
    n_clusters: int = 6,
    spread: float = 0.6,
    lo=(-5.0, -5.0, 0.0),
    hi=(5.0, 5.0, 5.0),
    seed: int = 0,
    with_view_dirs: bool = False,
) -> Scene:
    """Landmarks in Gaussian clusters, clipped to the box.

    Cluster centers are drawn uniform in the box shrunk by one spread so
    clusters stay mostly interior.
    """
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    pad = np.minimum(spread, (hi - lo) / 4)
    centers = rng.uniform(lo + pad, hi - pad, size=(n_clusters, 3))
    which = rng.integers(0, n_clusters, size=count)
    positions = centers[which] + rng.normal(scale=spread, size=(count, 3))
    positions = np.clip(positions, lo, hi)
    dirs = _random_unit(rng, count) if with_view_dirs else None
    return Scene(positions, dirs)
