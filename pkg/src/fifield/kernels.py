"""Hot numerical kernels, available in two interchangeable backends.

Backends:
  - "numba": @njit-compiled loops (default when numba imports).
  - "numpy": vectorized ndarray implementations of the same math.

Selection: FIFIELD_BACKEND environment variable at import time, or
set_backend() at runtime. Both backends produce identical results up to
floating-point summation order.

Shared math (per landmark p, camera position t, noise sigma):
    d = p - t, n = |d|, u = d/n, w = 1/(sigma^2 n^2), c2 = cross(p, u)
    I6 = [[ w(I - u u^T),            -w(S + u c2^T)        ],
          [ -w(S + u c2^T)^T,         w((p.p)I - p p^T - c2 c2^T)]]
with S = skew(p). This is the rotation-independent 6x6 information of one
bearing observation, state ordering [translation; rotation].

Factor storage layout: one row per occupied voxel; info rows hold N_v
6x6 blocks flattened to N_v*36 floats (block k entry (r,c) at
k*36 + r*6 + c); trace rows hold N_v floats.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install requirement
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range  # type: ignore[assignment]

# metric ids shared by both backends
METRIC_DET = 0
METRIC_LMIN = 1
METRIC_TRACE = 2

STATUS_OK = 0
STATUS_OUT_OF_FIELD = 1

_METRIC_IDS = {"det": METRIC_DET, "lmin": METRIC_LMIN, "trace": METRIC_TRACE}


def metric_id(name: str) -> int:
    return _METRIC_IDS[name]


# ──────────────────────────────────────────────────────────────────────
# numpy backend
# ──────────────────────────────────────────────────────────────────────


def _np_skew_batch(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    s = np.zeros((n, 3, 3))
    s[:, 0, 1] = -p[:, 2]
    s[:, 0, 2] = p[:, 1]
    s[:, 1, 0] = p[:, 2]
    s[:, 1, 2] = -p[:, 0]
    s[:, 2, 0] = -p[:, 1]
    s[:, 2, 1] = p[:, 0]
    return s


def _np_fims_flat(points: np.ndarray, cam_t: np.ndarray, sigma: float):
    """Per-landmark 6x6 informations, flattened.

    Returns:
        i6: (N, 36) row-major flattened 6x6 blocks.
        tr: (N,) traces of the 6x6 blocks.
    """
    d = points - cam_t
    n2 = np.einsum("ij,ij->i", d, d)
    n2 = np.maximum(n2, 1e-300)  # degenerate landmarks handled by callers
    u = d / np.sqrt(n2)[:, None]
    w = 1.0 / (sigma * sigma * n2)
    c2 = np.cross(points, u)
    pp = np.einsum("ij,ij->i", points, points)
    eye = np.eye(3)

    tl = w[:, None, None] * (eye - u[:, :, None] * u[:, None, :])
    s = _np_skew_batch(points)
    tr_blk = -w[:, None, None] * (s + u[:, :, None] * c2[:, None, :])
    br = w[:, None, None] * (
        pp[:, None, None] * eye
        - points[:, :, None] * points[:, None, :]
        - c2[:, :, None] * c2[:, None, :]
    )
    i6 = np.empty((points.shape[0], 6, 6))
    i6[:, :3, :3] = tl
    i6[:, :3, 3:] = tr_blk
    i6[:, 3:, :3] = np.transpose(tr_blk, (0, 2, 1))
    i6[:, 3:, 3:] = br
    tr = np.einsum("ijj->i", i6)
    return i6.reshape(-1, 36), tr


def _np_landmark_fims(points, cam_t, sigma):
    i6, _ = _np_fims_flat(np.asarray(points, dtype=np.float64), cam_t, sigma)
    return i6.reshape(-1, 6, 6)


def _np_quad_vp(u: np.ndarray) -> np.ndarray:
    """Position vectors for the quadratic model from unit bearings (N,3)."""
    n = u.shape[0]
    vp = np.empty((n, 10))
    vp[:, 0] = u[:, 0] * u[:, 0]
    vp[:, 1] = u[:, 1] * u[:, 1]
    vp[:, 2] = u[:, 2] * u[:, 2]
    vp[:, 3] = u[:, 0] * u[:, 1]
    vp[:, 4] = u[:, 0] * u[:, 2]
    vp[:, 5] = u[:, 1] * u[:, 2]
    vp[:, 6] = u[:, 0]
    vp[:, 7] = u[:, 1]
    vp[:, 8] = u[:, 2]
    vp[:, 9] = 1.0
    return vp


def _np_quad_vr(z: np.ndarray, k2: float, k1: float, k0: float) -> np.ndarray:
    return np.array(
        [
            k2 * z[0] * z[0],
            k2 * z[1] * z[1],
            k2 * z[2] * z[2],
            2.0 * k2 * z[0] * z[1],
            2.0 * k2 * z[0] * z[2],
            2.0 * k2 * z[1] * z[2],
            k1 * z[0],
            k1 * z[1],
            k1 * z[2],
            k0,
        ]
    )


def _np_gp_vr(z: np.ndarray, zs: np.ndarray, sig2: float, ell: float) -> np.ndarray:
    c = zs @ z
    return sig2 * np.exp((c - 1.0) / (ell * ell))


def _np_unit_dirs(points, c):
    d = points - c
    n = np.sqrt(np.einsum("ij,ij->i", d, d))
    n = np.maximum(n, 1e-300)
    return d / n[:, None]


def _np_build_quad(centers, points, sigma, k2, k1, k0, want_trace, mask):
    nv = centers.shape[0]
    width = 10 if want_trace else 360
    out = np.zeros((nv, width))
    for v in range(nv):
        pts = points
        if mask is not None:
            idx = np.nonzero(mask[v])[0]
            if idx.size == 0:
                continue
            pts = points[idx]
        u = _np_unit_dirs(pts, centers[v])
        vp = _np_quad_vp(u)
        i6, tr = _np_fims_flat(pts, centers[v], sigma)
        if want_trace:
            out[v] = vp.T @ tr
        else:
            out[v] = (vp.T @ i6).reshape(-1)
    return out


def _np_build_gp(centers, points, sigma, zs, kinv, ks, cos_alpha, want_trace, mask):
    nv = centers.shape[0]
    ns = zs.shape[0]
    width = ns if want_trace else ns * 36
    out = np.zeros((nv, width))
    for v in range(nv):
        pts = points
        if mask is not None:
            idx = np.nonzero(mask[v])[0]
            if idx.size == 0:
                continue
            pts = points[idx]
        u = _np_unit_dirs(pts, centers[v])
        vs = 1.0 / (1.0 + np.exp(-ks * (u @ zs.T - cos_alpha)))
        vp = vs @ kinv
        i6, tr = _np_fims_flat(pts, centers[v], sigma)
        if want_trace:
            out[v] = vp.T @ tr
        else:
            out[v] = (vp.T @ i6).reshape(-1)
    return out


def _np_exact_fim(rot, t, points, fx, fy, cx, cy, width, height, sigma):
    pc = (points - t) @ rot  # row i = R^T (p_i - t)
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = fx * pc[:, 0] / z + cx
        py = fy * pc[:, 1] / z + cy
    vis = (z > 0) & (px >= 0) & (px < width) & (py >= 0) & (py < height)
    if not vis.any():
        return np.zeros((6, 6))
    i6, _ = _np_fims_flat(points[vis], t, sigma)
    return i6.sum(axis=0).reshape(6, 6)


def _np_metric_of(fim: np.ndarray, mid: int) -> float:
    if mid == METRIC_DET:
        return float(np.linalg.det(fim))
    if mid == METRIC_LMIN:
        return float(np.linalg.eigvalsh(fim)[0])
    return float(np.trace(fim))


def _np_pc_metric_yaw_batch(positions, yaws, points, cam, sigma, r_base, mid):
    fx, fy, cx, cy, width, height = cam
    out = np.empty(positions.shape[0])
    for i in range(positions.shape[0]):
        cy_, sy_ = np.cos(yaws[i]), np.sin(yaws[i])
        rz = np.array([[cy_, -sy_, 0.0], [sy_, cy_, 0.0], [0.0, 0.0, 1.0]])
        fim = _np_exact_fim(
            rz @ r_base, positions[i], points, fx, fy, cx, cy, width, height, sigma
        )
        out[i] = _np_metric_of(fim, mid)
    return out


def _np_locate_nearest(origin, voxel_size, dims, pos):
    g = (pos - origin) / voxel_size
    ix, iy, iz = int(np.floor(g[0])), int(np.floor(g[1])), int(np.floor(g[2]))
    if not (0 <= ix < dims[0] and 0 <= iy < dims[1] and 0 <= iz < dims[2]):
        return -1
    return (ix * dims[1] + iy) * dims[2] + iz


def _np_trilinear_corners(origin, voxel_size, dims, pos):
    """Corner linear indices and weights, or None when outside."""
    g = (pos - origin) / voxel_size - 0.5
    base = np.floor(g).astype(np.int64)
    f = g - base
    for a in range(3):
        # exactly at the last voxel center: shift the cell down one step
        if base[a] + 1 == dims[a] and f[a] == 0.0:
            base[a] -= 1
            f[a] = 1.0
    if (base < 0).any() or (base + 1 > np.asarray(dims) - 1).any():
        return None
    idx = np.empty(8, dtype=np.int64)
    wts = np.empty(8)
    k = 0
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                ix, iy, iz = base[0] + dx, base[1] + dy, base[2] + dz
                idx[k] = (ix * dims[1] + iy) * dims[2] + iz
                wx = f[0] if dx else 1.0 - f[0]
                wy = f[1] if dy else 1.0 - f[1]
                wz = f[2] if dz else 1.0 - f[2]
                wts[k] = wx * wy * wz
                k += 1
    return idx, wts


def _np_contract(factors, row, vr):
    return (vr @ factors[row].reshape(vr.shape[0], 36)).reshape(6, 6)


def _np_query_fim(slots, factors, origin, voxel_size, dims, pos, vr, trilinear):
    fim = np.zeros((6, 6))
    if trilinear:
        corners = _np_trilinear_corners(origin, voxel_size, dims, pos)
        if corners is None:
            return fim, STATUS_OUT_OF_FIELD
        idx, wts = corners
        for j in range(8):
            row = slots[idx[j]]
            if row >= 0 and wts[j] != 0.0:
                fim += wts[j] * _np_contract(factors, row, vr)
        return fim, STATUS_OK
    lin = _np_locate_nearest(origin, voxel_size, dims, pos)
    if lin < 0:
        return fim, STATUS_OUT_OF_FIELD
    row = slots[lin]
    if row >= 0:
        fim = _np_contract(factors, row, vr)
    return fim, STATUS_OK


def _np_query_metric(
    slots, factors, origin, voxel_size, dims, pos, vr, mid, is_trace, trilinear
):
    def one(row):
        if row < 0:
            return 0.0
        if is_trace:
            return float(vr @ factors[row])
        return _np_metric_of(_np_contract(factors, row, vr), mid)

    if trilinear:
        corners = _np_trilinear_corners(origin, voxel_size, dims, pos)
        if corners is None:
            return 0.0, STATUS_OUT_OF_FIELD
        idx, wts = corners
        val = 0.0
        for j in range(8):
            if wts[j] != 0.0:
                val += wts[j] * one(slots[idx[j]])
        return val, STATUS_OK
    lin = _np_locate_nearest(origin, voxel_size, dims, pos)
    if lin < 0:
        return 0.0, STATUS_OUT_OF_FIELD
    return one(slots[lin]), STATUS_OK


def _np_field_metric_batch_quad(
    slots, factors, origin, voxel_size, dims, positions, zs,
    k2, k1, k0, mid, is_trace, trilinear,
):
    n = positions.shape[0]
    vals = np.empty(n)
    stat = np.empty(n, dtype=np.int64)
    for i in range(n):
        vr = _np_quad_vr(zs[i], k2, k1, k0)
        vals[i], stat[i] = _np_query_metric(
            slots, factors, origin, voxel_size, dims, positions[i], vr,
            mid, is_trace, trilinear,
        )
    return vals, stat


def _np_field_metric_batch_gp(
    slots, factors, origin, voxel_size, dims, positions, zs,
    zsamp, sig2, ell, mid, is_trace, trilinear,
):
    n = positions.shape[0]
    vals = np.empty(n)
    stat = np.empty(n, dtype=np.int64)
    for i in range(n):
        vr = _np_gp_vr(zs[i], zsamp, sig2, ell)
        vals[i], stat[i] = _np_query_metric(
            slots, factors, origin, voxel_size, dims, positions[i], vr,
            mid, is_trace, trilinear,
        )
    return vals, stat


# ──────────────────────────────────────────────────────────────────────
# numba backend
# ──────────────────────────────────────────────────────────────────────


@njit(cache=True)
def _nb_fim_flat_into(px, py, pz, tx, ty, tz, inv_s2, out):
    """Write one landmark's flattened 6x6 information into out (36,).

    Returns the block trace. inv_s2 = 1/sigma^2.
    """
    dx, dy, dz = px - tx, py - ty, pz - tz
    n2 = dx * dx + dy * dy + dz * dz
    if n2 < 1e-300:
        for k in range(36):
            out[k] = 0.0
        return 0.0
    n = np.sqrt(n2)
    ux, uy, uz = dx / n, dy / n, dz / n
    w = inv_s2 / n2
    # c2 = cross(p, u)
    cx_ = py * uz - pz * uy
    cy_ = pz * ux - px * uz
    cz_ = px * uy - py * ux
    pp = px * px + py * py + pz * pz

    # top-left w(I - u u^T)
    out[0] = w * (1.0 - ux * ux)
    out[1] = w * (-ux * uy)
    out[2] = w * (-ux * uz)
    out[6] = out[1]
    out[7] = w * (1.0 - uy * uy)
    out[8] = w * (-uy * uz)
    out[12] = out[2]
    out[13] = out[8]
    out[14] = w * (1.0 - uz * uz)
    # top-right -w(S + u c2^T), S = skew(p)
    out[3] = -w * (ux * cx_)
    out[4] = -w * (-pz + ux * cy_)
    out[5] = -w * (py + ux * cz_)
    out[9] = -w * (pz + uy * cx_)
    out[10] = -w * (uy * cy_)
    out[11] = -w * (-px + uy * cz_)
    out[15] = -w * (-py + uz * cx_)
    out[16] = -w * (px + uz * cy_)
    out[17] = -w * (uz * cz_)
    # bottom-left = top-right transposed
    out[18] = out[3]
    out[19] = out[9]
    out[20] = out[15]
    out[24] = out[4]
    out[25] = out[10]
    out[26] = out[16]
    out[30] = out[5]
    out[31] = out[11]
    out[32] = out[17]
    # bottom-right w((p.p)I - p p^T - c2 c2^T)
    out[21] = w * (pp - px * px - cx_ * cx_)
    out[22] = w * (-px * py - cx_ * cy_)
    out[23] = w * (-px * pz - cx_ * cz_)
    out[27] = out[22]
    out[28] = w * (pp - py * py - cy_ * cy_)
    out[29] = w * (-py * pz - cy_ * cz_)
    out[33] = out[23]
    out[34] = out[29]
    out[35] = w * (-pz * pz + pp - cz_ * cz_)
    return out[0] + out[7] + out[14] + out[21] + out[28] + out[35]


@njit(cache=True)
def _nb_build_quad(centers, points, sigma, k2, k1, k0, want_trace, mask, use_mask):
    nv = centers.shape[0]
    npts = points.shape[0]
    width = 10 if want_trace else 360
    out = np.zeros((nv, width))
    blk = np.empty(36)
    vp = np.empty(10)
    inv_s2 = 1.0 / (sigma * sigma)
    for v in range(nv):
        cx_, cy_, cz_ = centers[v, 0], centers[v, 1], centers[v, 2]
        for i in range(npts):
            if use_mask and mask[v, i] == 0:
                continue
            px, py, pz = points[i, 0], points[i, 1], points[i, 2]
            dx, dy, dz = px - cx_, py - cy_, pz - cz_
            n2 = dx * dx + dy * dy + dz * dz
            if n2 < 1e-300:
                continue
            n = np.sqrt(n2)
            ux, uy, uz = dx / n, dy / n, dz / n
            vp[0] = ux * ux
            vp[1] = uy * uy
            vp[2] = uz * uz
            vp[3] = ux * uy
            vp[4] = ux * uz
            vp[5] = uy * uz
            vp[6] = ux
            vp[7] = uy
            vp[8] = uz
            vp[9] = 1.0
            tr = _nb_fim_flat_into(px, py, pz, cx_, cy_, cz_, inv_s2, blk)
            if want_trace:
                for k in range(10):
                    out[v, k] += vp[k] * tr
            else:
                for k in range(10):
                    vk = vp[k]
                    base = k * 36
                    for e in range(36):
                        out[v, base + e] += vk * blk[e]
    return out


@njit(cache=True)
def _nb_build_gp(centers, points, sigma, zs, kinv, ks, cos_alpha, want_trace, mask, use_mask):
    nv = centers.shape[0]
    npts = points.shape[0]
    ns = zs.shape[0]
    width = ns if want_trace else ns * 36
    out = np.zeros((nv, width))
    inv_s2 = 1.0 / (sigma * sigma)
    zst = np.ascontiguousarray(zs.T)
    for v in range(nv):
        cx_, cy_, cz_ = centers[v, 0], centers[v, 1], centers[v, 2]
        # unit directions toward every contributing landmark
        u = np.zeros((npts, 3))
        keep = np.zeros(npts, dtype=np.uint8)
        i6 = np.zeros((npts, 36))
        tr = np.zeros(npts)
        for i in range(npts):
            if use_mask and mask[v, i] == 0:
                continue
            dx = points[i, 0] - cx_
            dy = points[i, 1] - cy_
            dz = points[i, 2] - cz_
            n2 = dx * dx + dy * dy + dz * dz
            if n2 < 1e-300:
                continue
            n = np.sqrt(n2)
            u[i, 0] = dx / n
            u[i, 1] = dy / n
            u[i, 2] = dz / n
            keep[i] = 1
            tr[i] = _nb_fim_flat_into(
                points[i, 0], points[i, 1], points[i, 2], cx_, cy_, cz_, inv_s2, i6[i]
            )
        # sigmoid visibility targets at the sampled directions, then vp = vs @ kinv
        cang = np.dot(u, zst)  # (npts, ns); zero rows for skipped landmarks
        vs = 1.0 / (1.0 + np.exp(-ks * (cang - cos_alpha)))
        for i in range(npts):
            if keep[i] == 0:
                for g in range(ns):
                    vs[i, g] = 0.0
        vp = np.dot(vs, kinv)
        if want_trace:
            for i in range(npts):
                if keep[i] == 0:
                    continue
                for k in range(ns):
                    out[v, k] += vp[i, k] * tr[i]
        else:
            row = np.dot(np.ascontiguousarray(vp.T), i6)  # (ns, 36)
            for k in range(ns):
                base = k * 36
                for e in range(36):
                    out[v, base + e] = row[k, e]
    return out


@njit(cache=True, parallel=True)
def _nb_build_quad_par(centers, points, sigma, k2, k1, k0, want_trace, mask, use_mask):
    nv = centers.shape[0]
    npts = points.shape[0]
    width = 10 if want_trace else 360
    out = np.zeros((nv, width))
    inv_s2 = 1.0 / (sigma * sigma)
    for v in prange(nv):
        blk = np.empty(36)
        vp = np.empty(10)
        cx_, cy_, cz_ = centers[v, 0], centers[v, 1], centers[v, 2]
        for i in range(npts):
            if use_mask and mask[v, i] == 0:
                continue
            px, py, pz = points[i, 0], points[i, 1], points[i, 2]
            dx, dy, dz = px - cx_, py - cy_, pz - cz_
            n2 = dx * dx + dy * dy + dz * dz
            if n2 < 1e-300:
                continue
            n = np.sqrt(n2)
            ux, uy, uz = dx / n, dy / n, dz / n
            vp[0] = ux * ux
            vp[1] = uy * uy
            vp[2] = uz * uz
            vp[3] = ux * uy
            vp[4] = ux * uz
            vp[5] = uy * uz
            vp[6] = ux
            vp[7] = uy
            vp[8] = uz
            vp[9] = 1.0
            tr = _nb_fim_flat_into(px, py, pz, cx_, cy_, cz_, inv_s2, blk)
            if want_trace:
                for k in range(10):
                    out[v, k] += vp[k] * tr
            else:
                for k in range(10):
                    vk = vp[k]
                    base = k * 36
                    for e in range(36):
                        out[v, base + e] += vk * blk[e]
    return out


@njit(cache=True)
def _nb_exact_fim(rot, t, points, fx, fy, cx, cy, width, height, sigma):
    fim = np.zeros(36)
    blk = np.empty(36)
    inv_s2 = 1.0 / (sigma * sigma)
    r00, r10, r20 = rot[0, 0], rot[1, 0], rot[2, 0]
    r01, r11, r21 = rot[0, 1], rot[1, 1], rot[2, 1]
    r02, r12, r22 = rot[0, 2], rot[1, 2], rot[2, 2]
    tx, ty, tz = t[0], t[1], t[2]
    for i in range(points.shape[0]):
        dx = points[i, 0] - tx
        dy = points[i, 1] - ty
        dz = points[i, 2] - tz
        # camera coordinates R^T d
        zc = r02 * dx + r12 * dy + r22 * dz
        if zc <= 0.0:
            continue
        xc = r00 * dx + r10 * dy + r20 * dz
        yc = r01 * dx + r11 * dy + r21 * dz
        u_px = fx * xc / zc + cx
        if u_px < 0.0 or u_px >= width:
            continue
        v_px = fy * yc / zc + cy
        if v_px < 0.0 or v_px >= height:
            continue
        _nb_fim_flat_into(points[i, 0], points[i, 1], points[i, 2], tx, ty, tz, inv_s2, blk)
        for e in range(36):
            fim[e] += blk[e]
    return fim.reshape(6, 6)


@njit(cache=True)
def _nb_metric_of(fim, mid):
    if mid == 0:
        return np.linalg.det(fim)
    if mid == 1:
        return np.linalg.eigvalsh(fim)[0]
    return fim[0, 0] + fim[1, 1] + fim[2, 2] + fim[3, 3] + fim[4, 4] + fim[5, 5]


@njit(cache=True)
def _nb_pc_metric_yaw_batch(positions, yaws, points, fx, fy, cx, cy, width, height, sigma, r_base, mid):
    n = positions.shape[0]
    out = np.empty(n)
    rot = np.empty((3, 3))
    for i in range(n):
        c = np.cos(yaws[i])
        s = np.sin(yaws[i])
        for col in range(3):
            rot[0, col] = c * r_base[0, col] - s * r_base[1, col]
            rot[1, col] = s * r_base[0, col] + c * r_base[1, col]
            rot[2, col] = r_base[2, col]
        fim = _nb_exact_fim(rot, positions[i], points, fx, fy, cx, cy, width, height, sigma)
        out[i] = _nb_metric_of(fim, mid)
    return out


@njit(cache=True, inline="always")
def _nb_locate_nearest(origin, voxel_size, dims, x, y, z):
    ix = int(np.floor((x - origin[0]) / voxel_size))
    iy = int(np.floor((y - origin[1]) / voxel_size))
    iz = int(np.floor((z - origin[2]) / voxel_size))
    if ix < 0 or iy < 0 or iz < 0 or ix >= dims[0] or iy >= dims[1] or iz >= dims[2]:
        return -1
    return (ix * dims[1] + iy) * dims[2] + iz


@njit(cache=True)
def _nb_quad_vr_into(zx, zy, zz, k2, k1, k0, vr):
    vr[0] = k2 * zx * zx
    vr[1] = k2 * zy * zy
    vr[2] = k2 * zz * zz
    vr[3] = 2.0 * k2 * zx * zy
    vr[4] = 2.0 * k2 * zx * zz
    vr[5] = 2.0 * k2 * zy * zz
    vr[6] = k1 * zx
    vr[7] = k1 * zy
    vr[8] = k1 * zz
    vr[9] = k0


@njit(cache=True)
def _nb_gp_vr_into(zx, zy, zz, zs, sig2, ell, vr):
    inv_l2 = 1.0 / (ell * ell)
    for g in range(zs.shape[0]):
        c = zx * zs[g, 0] + zy * zs[g, 1] + zz * zs[g, 2]
        vr[g] = sig2 * np.exp((c - 1.0) * inv_l2)


@njit(cache=True, inline="always")
def _nb_contract_into(factors, row, vr, fim):
    nv = vr.shape[0]
    for e in range(36):
        fim[e] = 0.0
    for k in range(nv):
        vk = vr[k]
        if vk == 0.0:
            continue
        base = k * 36
        for e in range(36):
            fim[e] += vk * factors[row, base + e]


@njit(cache=True)
def _nb_query_fim(slots, factors, origin, voxel_size, dims, pos, vr, trilinear):
    fim = np.zeros(36)
    work = np.empty(36)
    if trilinear:
        gx = (pos[0] - origin[0]) / voxel_size - 0.5
        gy = (pos[1] - origin[1]) / voxel_size - 0.5
        gz = (pos[2] - origin[2]) / voxel_size - 0.5
        bx = int(np.floor(gx))
        by = int(np.floor(gy))
        bz = int(np.floor(gz))
        fxw = gx - bx
        fyw = gy - by
        fzw = gz - bz
        # exactly at the last voxel center: shift the cell down one step
        if bx + 1 == dims[0] and fxw == 0.0:
            bx -= 1
            fxw = 1.0
        if by + 1 == dims[1] and fyw == 0.0:
            by -= 1
            fyw = 1.0
        if bz + 1 == dims[2] and fzw == 0.0:
            bz -= 1
            fzw = 1.0
        if (
            bx < 0 or by < 0 or bz < 0
            or bx + 1 >= dims[0] or by + 1 >= dims[1] or bz + 1 >= dims[2]
        ):
            return fim.reshape(6, 6), STATUS_OUT_OF_FIELD
        for dx in range(2):
            wx = fxw if dx == 1 else 1.0 - fxw
            for dy in range(2):
                wy = fyw if dy == 1 else 1.0 - fyw
                for dz in range(2):
                    wz = fzw if dz == 1 else 1.0 - fzw
                    wgt = wx * wy * wz
                    if wgt == 0.0:
                        continue
                    lin = ((bx + dx) * dims[1] + (by + dy)) * dims[2] + (bz + dz)
                    row = slots[lin]
                    if row < 0:
                        continue
                    _nb_contract_into(factors, row, vr, work)
                    for e in range(36):
                        fim[e] += wgt * work[e]
        return fim.reshape(6, 6), STATUS_OK
    lin = _nb_locate_nearest(origin, voxel_size, dims, pos[0], pos[1], pos[2])
    if lin < 0:
        return fim.reshape(6, 6), STATUS_OUT_OF_FIELD
    row = slots[lin]
    if row >= 0:
        _nb_contract_into(factors, row, vr, fim)
    return fim.reshape(6, 6), STATUS_OK


@njit(cache=True)
def _nb_query_fim_quad(slots, factors, origin, voxel_size, dims, pos, z, k2, k1, k0, trilinear):
    vr = np.empty(10)
    _nb_quad_vr_into(z[0], z[1], z[2], k2, k1, k0, vr)
    return _nb_query_fim(slots, factors, origin, voxel_size, dims, pos, vr, trilinear)


@njit(cache=True)
def _nb_query_fim_gp(slots, factors, origin, voxel_size, dims, pos, z, zs, sig2, ell, trilinear):
    vr = np.empty(zs.shape[0])
    _nb_gp_vr_into(z[0], z[1], z[2], zs, sig2, ell, vr)
    return _nb_query_fim(slots, factors, origin, voxel_size, dims, pos, vr, trilinear)


@njit(cache=True)
def _nb_exact_fim_batch(rots, ts, points, fx, fy, cx, cy, width, height, sigma):
    q = ts.shape[0]
    out = np.empty((q, 6, 6))
    for i in range(q):
        out[i] = _nb_exact_fim(rots[i], ts[i], points, fx, fy, cx, cy, width, height, sigma)
    return out


@njit(cache=True)
def _nb_query_fim_batch_quad(slots, factors, origin, voxel_size, dims, positions, axes, k2, k1, k0, trilinear):
    q = positions.shape[0]
    fims = np.empty((q, 6, 6))
    status = np.empty(q, dtype=np.int64)
    vr = np.empty(10)
    for i in range(q):
        _nb_quad_vr_into(axes[i, 0], axes[i, 1], axes[i, 2], k2, k1, k0, vr)
        fim, st = _nb_query_fim(slots, factors, origin, voxel_size, dims, positions[i], vr, trilinear)
        fims[i] = fim
        status[i] = st
    return fims, status


@njit(cache=True)
def _nb_query_fim_batch_gp(slots, factors, origin, voxel_size, dims, positions, axes, zs, sig2, ell, trilinear):
    q = positions.shape[0]
    fims = np.empty((q, 6, 6))
    status = np.empty(q, dtype=np.int64)
    vr = np.empty(zs.shape[0])
    for i in range(q):
        _nb_gp_vr_into(axes[i, 0], axes[i, 1], axes[i, 2], zs, sig2, ell, vr)
        fim, st = _nb_query_fim(slots, factors, origin, voxel_size, dims, positions[i], vr, trilinear)
        fims[i] = fim
        status[i] = st
    return fims, status


# ──────────────────────────────────────────────────────────────────────
# sampling-planner inner loop (numba backend only; the python loop in
# rrt.py is the fallback and the reference for the semantics)
# ──────────────────────────────────────────────────────────────────────


@njit(cache=True, inline="always")
def _nb_wrap(a):
    w = (-a + np.pi) % (2.0 * np.pi)
    return np.pi - w


@njit(cache=True, inline="always")
def _nb_angdist(a):
    # |angle difference| for inputs already in (-2*pi, 2*pi), i.e.
    # differences of wrapped angles; avoids fmod and trig
    d = a if a >= 0.0 else -a
    return d if d <= np.pi else 2.0 * np.pi - d


@njit(cache=True, inline="always")
def _nb_cell_axis(v, g0, gcell, gn):
    i = int((v - g0) / gcell)
    if i < 0:
        i = 0
    if i > gn - 1:
        i = gn - 1
    return i


@njit(cache=True)
def _nb_world_dist(spheres, boxes, x, y, z):
    d = np.inf
    for i in range(spheres.shape[0]):
        dx = x - spheres[i, 0]
        dy = y - spheres[i, 1]
        dz = z - spheres[i, 2]
        dd = np.sqrt(dx * dx + dy * dy + dz * dz) - spheres[i, 3]
        if dd < d:
            d = dd
    for i in range(boxes.shape[0]):
        qx = abs(x - 0.5 * (boxes[i, 0] + boxes[i, 3])) - 0.5 * (boxes[i, 3] - boxes[i, 0])
        qy = abs(y - 0.5 * (boxes[i, 1] + boxes[i, 4])) - 0.5 * (boxes[i, 4] - boxes[i, 1])
        qz = abs(z - 0.5 * (boxes[i, 2] + boxes[i, 5])) - 0.5 * (boxes[i, 5] - boxes[i, 2])
        ox = qx if qx > 0.0 else 0.0
        oy = qy if qy > 0.0 else 0.0
        oz = qz if qz > 0.0 else 0.0
        mq = qx
        if qy > mq:
            mq = qy
        if qz > mq:
            mq = qz
        dd = np.sqrt(ox * ox + oy * oy + oz * oz) + (mq if mq < 0.0 else 0.0)
        if dd < d:
            d = dd
    return d


@njit(cache=True)
def _nb_gate_ok(
    px, py, pz, yw, gate_mode, gmodel,
    slots, factors, origin, voxel_size, dims,
    k2, k1, k0, zs, sig2, ell, mid, is_trace, trilinear, threshold,
    points, fx, fy, cx, cy, width, height, sigma, r_mount,
    vr, rot, p3,
):
    if gate_mode == 1:
        ax = np.cos(yw)
        ay = np.sin(yw)
        if gmodel == 1:
            _nb_quad_vr_into(ax, ay, 0.0, k2, k1, k0, vr)
        else:
            _nb_gp_vr_into(ax, ay, 0.0, zs, sig2, ell, vr)
        p3[0] = px
        p3[1] = py
        p3[2] = pz
        val, status = _nb_query_metric(
            slots, factors, origin, voxel_size, dims, p3, vr, mid, is_trace, trilinear
        )
        return status == STATUS_OK and val >= threshold
    c = np.cos(yw)
    s = np.sin(yw)
    for col in range(3):
        rot[0, col] = c * r_mount[0, col] - s * r_mount[1, col]
        rot[1, col] = s * r_mount[0, col] + c * r_mount[1, col]
        rot[2, col] = r_mount[2, col]
    p3[0] = px
    p3[1] = py
    p3[2] = pz
    fim = _nb_exact_fim(rot, p3, points, fx, fy, cx, cy, width, height, sigma)
    return _nb_metric_of(fim, mid) >= threshold


@njit(cache=True)
def _nb_edge_ok(
    p0x, p0y, p0z, y0, p1x, p1y, p1z, y1, resolution,
    spheres, boxes, min_clearance, has_world,
    gate_mode, gmodel,
    slots, factors, origin, voxel_size, dims,
    k2, k1, k0, zs, sig2, ell, mid, is_trace, trilinear, threshold,
    points, fx, fy, cx, cy, width, height, sigma, r_mount,
    vr, rot, p3,
):
    dx = p1x - p0x
    dy = p1y - p0y
    dz = p1z - p0z
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    dyaw = _nb_wrap(y1 - y0)
    span = dist if dist >= abs(dyaw) else abs(dyaw)
    k = int(np.ceil(span / resolution)) + 1
    if k < 2:
        k = 2
    denom = float(k - 1)
    # the start state is an already-validated tree vertex
    for si in range(1, k):
        t = si / denom
        px = p0x + t * dx
        py = p0y + t * dy
        pz = p0z + t * dz
        yw = y0 + t * dyaw
        if has_world and _nb_world_dist(spheres, boxes, px, py, pz) < min_clearance:
            return False
        if gate_mode != 0 and not _nb_gate_ok(
            px, py, pz, yw, gate_mode, gmodel,
            slots, factors, origin, voxel_size, dims,
            k2, k1, k0, zs, sig2, ell, mid, is_trace, trilinear, threshold,
            points, fx, fy, cx, cy, width, height, sigma, r_mount,
            vr, rot, p3,
        ):
            return False
    return True


# linear scans beat the cell index while the tree is small
_NN_LINEAR_MAX = 2048


@njit(cache=True, inline="always")
def _nb_yaw_cell(yw, ywcell, gnw):
    iw = int((yw + np.pi) / ywcell)
    if iw < 0:
        iw = 0
    if iw > gnw - 1:
        iw = gnw - 1
    return iw


@njit(cache=True, inline="always")
def _nb_axis_gap(v, lov, gcell, i):
    """Distance from coordinate v to the span of cell i on one axis."""
    d = v - (lov + i * gcell)
    if d < 0.0:
        return -d
    if d > gcell:
        return d - gcell
    return 0.0


@njit(cache=True, inline="always")
def _nb_yaw_gap(yw, iw, ywcell):
    """Circular distance from angle yw to the span of yaw cell iw."""
    d = _nb_angdist(_nb_wrap(yw - (-np.pi + (iw + 0.5) * ywcell))) - 0.5 * ywcell
    return d if d > 0.0 else 0.0


@njit(cache=True)
def _nb_nn(
    cstart, cid, cxyz, head, nxt, pos, yaw, n,
    lo, gcell, gnx, gny, gnz, gnw, sx, sy, sz, syw, w_pos, w_yaw,
):
    """Index of the vertex nearest to the sample under the combined metric.

    Small trees use a linear scan; larger ones walk the 4-D cell index
    (three position axes plus wrapped yaw) outward in boxes, pruning
    once no unscanned cell can beat the best metric found: a cell at
    Chebyshev ring r holds states at least (r-1)*pitch away, where
    pitch is the smallest per-axis metric width of a cell, and each
    cell is also skipped when its exact metric lower bound cannot beat
    the best. Per cell, members live in the compacted arrays
    (cstart/cid/cxyz) plus a head/nxt overflow chain for vertices
    inserted since the last compaction.
    """
    best_d = np.inf
    bd2 = np.inf  # best_d squared, for the spatial-only quick reject
    wp2 = w_pos * w_pos
    ni = 0
    if n <= _NN_LINEAR_MAX:
        for j in range(n):
            ddx = pos[j, 0] - sx
            ddy = pos[j, 1] - sy
            ddz = pos[j, 2] - sz
            dd = ddx * ddx + ddy * ddy + ddz * ddz
            if wp2 * dd >= bd2:
                continue
            dj = w_pos * np.sqrt(dd) + w_yaw * _nb_angdist(yaw[j] - syw)
            if dj < best_d:
                best_d = dj
                bd2 = best_d * best_d
                ni = j
        return ni

    ywcell = 2.0 * np.pi / gnw
    qx = _nb_cell_axis(sx, lo[0], gcell, gnx)
    qy = _nb_cell_axis(sy, lo[1], gcell, gny)
    qz = _nb_cell_axis(sz, lo[2], gcell, gnz)
    qw = _nb_yaw_cell(syw, ywcell, gnw)
    pitch = w_pos * gcell
    if gnw > 1:
        pw = w_yaw * ywcell
        if pw < pitch:
            pitch = pw
    max_r = gnx
    if gny > max_r:
        max_r = gny
    if gnz > max_r:
        max_r = gnz
    if gnw > max_r:
        max_r = gnw
    half_w = (gnw - 1) // 2
    r_prev = -1
    r = 1
    while True:
        x0 = qx - r if qx - r > 0 else 0
        x1 = qx + r if qx + r < gnx - 1 else gnx - 1
        y0 = qy - r if qy - r > 0 else 0
        y1 = qy + r if qy + r < gny - 1 else gny - 1
        z0 = qz - r if qz - r > 0 else 0
        z1 = qz + r if qz + r < gnz - 1 else gnz - 1
        all_w = 2 * r + 1 >= gnw
        wb = half_w if r > half_w else r
        for ix in range(x0, x1 + 1):
            rx = ix - qx if ix > qx else qx - ix
            gx = _nb_axis_gap(sx, lo[0], gcell, ix)
            lbx = gx * gx
            for iy in range(y0, y1 + 1):
                ry = iy - qy if iy > qy else qy - iy
                rxy = rx if rx > ry else ry
                gy = _nb_axis_gap(sy, lo[1], gcell, iy)
                lbxy = lbx + gy * gy
                for iz in range(z0, z1 + 1):
                    rz = iz - qz if iz > qz else qz - iz
                    rxyz = rxy if rxy > rz else rz
                    gz = _nb_axis_gap(sz, lo[2], gcell, iz)
                    lbp = wp2 * (lbxy + gz * gz)  # squared position bound
                    if lbp >= bd2:
                        continue
                    base = ((ix * gny + iy) * gnz + iz) * gnw
                    for dw in range(-wb if not all_w else 0, (wb if not all_w else gnw - 1) + 1):
                        if all_w:
                            iw = dw
                            aw = iw - qw if iw > qw else qw - iw
                            rw = aw if aw <= gnw - aw else gnw - aw
                        else:
                            iw = qw + dw
                            if iw < 0:
                                iw += gnw
                            elif iw >= gnw:
                                iw -= gnw
                            rw = dw if dw >= 0 else -dw
                        r4 = rxyz if rxyz > rw else rw
                        if r4 <= r_prev or r4 > r:
                            continue  # scanned earlier, or a later ring
                        if gnw > 1:
                            rem = best_d - w_yaw * _nb_yaw_gap(syw, iw, ywcell)
                            if rem <= 0.0 or lbp >= rem * rem:
                                continue  # cell cannot beat the best
                        c = base + iw
                        for t in range(cstart[c], cstart[c + 1]):
                            ddx = cxyz[t, 0] - sx
                            ddy = cxyz[t, 1] - sy
                            ddz = cxyz[t, 2] - sz
                            dd = ddx * ddx + ddy * ddy + ddz * ddz
                            if wp2 * dd < bd2:
                                dj = w_pos * np.sqrt(dd) + w_yaw * _nb_angdist(cxyz[t, 3] - syw)
                                if dj < best_d:
                                    best_d = dj
                                    bd2 = best_d * best_d
                                    ni = cid[t]
                        j = head[c]
                        while j >= 0:
                            ddx = pos[j, 0] - sx
                            ddy = pos[j, 1] - sy
                            ddz = pos[j, 2] - sz
                            dd = ddx * ddx + ddy * ddy + ddz * ddz
                            if wp2 * dd < bd2:
                                dj = w_pos * np.sqrt(dd) + w_yaw * _nb_angdist(yaw[j] - syw)
                                if dj < best_d:
                                    best_d = dj
                                    bd2 = best_d * best_d
                                    ni = j
                            j = nxt[j]
        if best_d < np.inf:
            need = int(best_d / pitch) + 1
            if r >= need or r >= max_r:
                return ni
            nr = need if need < max_r else max_r
        else:
            if r >= max_r:
                return ni
            nr = 2 * r if 2 * r < max_r else max_r
        r_prev = r
        r = nr


@njit(cache=True)
def _nb_collect_near(
    cstart, cid, cxyz, head, nxt, pos, yaw, n,
    lo, gcell, gnx, gny, gnz, gnw, px, py, pz, pyw, w_pos, w_yaw,
    radius, cidx, cdn,
):
    """Vertices within `radius` of the new state; returns their count.

    Fills cidx with indices and cdn with the matching metric values. The
    4-D cell index bounds the scan to the box that can contain the
    radius, and cells whose metric lower bound exceeds the radius are
    skipped outright; per-cell storage is as in _nb_nn.
    """
    m = 0
    r2 = radius * radius
    wp2 = w_pos * w_pos
    if n <= _NN_LINEAR_MAX:
        for j in range(n):
            ddx = pos[j, 0] - px
            ddy = pos[j, 1] - py
            ddz = pos[j, 2] - pz
            dd = ddx * ddx + ddy * ddy + ddz * ddz
            if wp2 * dd > r2:
                continue
            dj = w_pos * np.sqrt(dd) + w_yaw * _nb_angdist(yaw[j] - pyw)
            if dj <= radius:
                cidx[m] = j
                cdn[m] = dj
                m += 1
        return m

    ywcell = 2.0 * np.pi / gnw
    rc = int((radius / w_pos) / gcell) + 1
    rcw = int((radius / w_yaw) / ywcell) + 1 if (gnw > 1 and w_yaw > 0) else 0
    qx = _nb_cell_axis(px, lo[0], gcell, gnx)
    qy = _nb_cell_axis(py, lo[1], gcell, gny)
    qz = _nb_cell_axis(pz, lo[2], gcell, gnz)
    qw = _nb_yaw_cell(pyw, ywcell, gnw)
    x0 = qx - rc if qx - rc > 0 else 0
    x1 = qx + rc if qx + rc < gnx - 1 else gnx - 1
    y0 = qy - rc if qy - rc > 0 else 0
    y1 = qy + rc if qy + rc < gny - 1 else gny - 1
    z0 = qz - rc if qz - rc > 0 else 0
    z1 = qz + rc if qz + rc < gnz - 1 else gnz - 1
    all_w = 2 * rcw + 1 >= gnw
    half_w = (gnw - 1) // 2
    wb = half_w if rcw > half_w else rcw
    for ix in range(x0, x1 + 1):
        gx = _nb_axis_gap(px, lo[0], gcell, ix)
        lbx = gx * gx
        for iy in range(y0, y1 + 1):
            gy = _nb_axis_gap(py, lo[1], gcell, iy)
            lbxy = lbx + gy * gy
            for iz in range(z0, z1 + 1):
                gz = _nb_axis_gap(pz, lo[2], gcell, iz)
                lbp = wp2 * (lbxy + gz * gz)  # squared position bound
                if lbp > r2:
                    continue
                base = ((ix * gny + iy) * gnz + iz) * gnw
                for dw in range(-wb if not all_w else 0, (wb if not all_w else gnw - 1) + 1):
                    if all_w:
                        iw = dw
                    else:
                        iw = qw + dw
                        if iw < 0:
                            iw += gnw
                        elif iw >= gnw:
                            iw -= gnw
                    if gnw > 1:
                        rem = radius - w_yaw * _nb_yaw_gap(pyw, iw, ywcell)
                        if rem < 0.0 or lbp > rem * rem:
                            continue  # cell entirely outside the radius
                    c = base + iw
                    for t in range(cstart[c], cstart[c + 1]):
                        ddx = cxyz[t, 0] - px
                        ddy = cxyz[t, 1] - py
                        ddz = cxyz[t, 2] - pz
                        dd = ddx * ddx + ddy * ddy + ddz * ddz
                        if wp2 * dd <= r2:
                            dj = w_pos * np.sqrt(dd) + w_yaw * _nb_angdist(cxyz[t, 3] - pyw)
                            if dj <= radius:
                                cidx[m] = cid[t]
                                cdn[m] = dj
                                m += 1
                    j = head[c]
                    while j >= 0:
                        ddx = pos[j, 0] - px
                        ddy = pos[j, 1] - py
                        ddz = pos[j, 2] - pz
                        dd = ddx * ddx + ddy * ddy + ddz * ddz
                        if wp2 * dd <= r2:
                            dj = w_pos * np.sqrt(dd) + w_yaw * _nb_angdist(yaw[j] - pyw)
                            if dj <= radius:
                                cidx[m] = j
                                cdn[m] = dj
                                m += 1
                        j = nxt[j]
    return m


@njit(cache=True)
def _nb_rrt_chunk(
    pos, yaw, parent, cost, state, goalv,
    cstart, cid, cxyz, head, nxt, cidx, cdn,
    lo, hi, gcell, gnx, gny, gnz, gnw, rebuild, gamma,
    step, yaw_step, rewire_radius, edge_resolution, goal_bias, w_pos, w_yaw,
    iters, seed,
    spheres, boxes, min_clearance,
    gate_mode, gmodel,
    slots, factors, origin, voxel_size, dims,
    k2, k1, k0, zs, sig2, ell, mid, is_trace, trilinear, threshold,
    points, fx, fy, cx, cy, width, height, sigma, r_mount,
):
    """One bounded batch of tree-growth iterations.

    state = [n, edge_checks, goal_parent, iterations]; goalv holds the
    goal state and the best goal cost so far. The 4-D vertex cell index
    over the bounds box and the yaw circle (gcell position cells,
    gnx*gny*gnz*gnw cells total) is compacted on entry when rebuild is
    nonzero, by counting sort into cstart/cid plus interleaved x/y/z/yaw
    member rows in cxyz for contiguous scans; with rebuild zero the
    compacted arrays and the head/nxt overflow chains persist from
    earlier batches (the grid geometry must then be unchanged). New
    vertices always go on the chains, so a full sort is only needed
    when the caller regrids. cidx/cdn are neighbor scratch. The
    neighbor radius shrinks as gamma * (log(n+1)/(n+1))^(1/4), capped
    at rewire_radius. Mutates the tree arrays in place; the caller
    guarantees capacity for `iters` insertions.
    """
    np.random.seed(seed)
    n = state[0]
    edge_checks = state[1]
    goal_parent = state[2]
    goal_cost = goalv[4]
    gx, gy, gz, gyw = goalv[0], goalv[1], goalv[2], goalv[3]
    cap = pos.shape[0]
    has_world = spheres.shape[0] > 0 or boxes.shape[0] > 0
    connect_radius = step if step > rewire_radius else rewire_radius
    ywcell = 2.0 * np.pi / gnw
    rot = np.empty((3, 3))
    p3 = np.empty(3)
    nv = 10 if gmodel == 1 else zs.shape[0]
    if nv < 1:
        nv = 1
    vr = np.empty(nv)

    # compact the cell index: counting sort of all vertices by cell
    if rebuild != 0:
        ncells = gnx * gny * gnz * gnw
        for c in range(ncells + 1):
            cstart[c] = 0
        for j in range(n):
            c = (
                (
                    _nb_cell_axis(pos[j, 0], lo[0], gcell, gnx) * gny
                    + _nb_cell_axis(pos[j, 1], lo[1], gcell, gny)
                ) * gnz + _nb_cell_axis(pos[j, 2], lo[2], gcell, gnz)
            ) * gnw + _nb_yaw_cell(yaw[j], ywcell, gnw)
            cstart[c + 1] += 1
        for c in range(ncells):
            cstart[c + 1] += cstart[c]
        cur = cstart[:ncells].copy()
        for j in range(n):
            c = (
                (
                    _nb_cell_axis(pos[j, 0], lo[0], gcell, gnx) * gny
                    + _nb_cell_axis(pos[j, 1], lo[1], gcell, gny)
                ) * gnz + _nb_cell_axis(pos[j, 2], lo[2], gcell, gnz)
            ) * gnw + _nb_yaw_cell(yaw[j], ywcell, gnw)
            t = cur[c]
            cur[c] = t + 1
            cid[t] = j
            cxyz[t, 0] = pos[j, 0]
            cxyz[t, 1] = pos[j, 1]
            cxyz[t, 2] = pos[j, 2]
            cxyz[t, 3] = yaw[j]
        for c in range(ncells):
            head[c] = -1

    done = 0
    for _ in range(iters):
        if n >= cap:
            break
        done += 1

        if np.random.random() < goal_bias:
            sx, sy, sz, syw = gx, gy, gz, gyw
        else:
            sx = lo[0] + (hi[0] - lo[0]) * np.random.random()
            sy = lo[1] + (hi[1] - lo[1]) * np.random.random()
            sz = lo[2] + (hi[2] - lo[2]) * np.random.random()
            syw = -np.pi + 2.0 * np.pi * np.random.random()

        ni = _nb_nn(
            cstart, cid, cxyz, head, nxt, pos, yaw, n,
            lo, gcell, gnx, gny, gnz, gnw, sx, sy, sz, syw, w_pos, w_yaw,
        )

        # steer with bounded position and yaw steps
        vx = sx - pos[ni, 0]
        vy = sy - pos[ni, 1]
        vz = sz - pos[ni, 2]
        dist = np.sqrt(vx * vx + vy * vy + vz * vz)
        if dist <= step:
            nx, ny, nz = sx, sy, sz
        else:
            f = step / dist
            nx = pos[ni, 0] + vx * f
            ny = pos[ni, 1] + vy * f
            nz = pos[ni, 2] + vz * f
        dyw = _nb_wrap(syw - yaw[ni])
        if dyw > yaw_step:
            dyw = yaw_step
        elif dyw < -yaw_step:
            dyw = -yaw_step
        nyw = _nb_wrap(yaw[ni] + dyw)

        edge_checks += 1
        if not _nb_edge_ok(
            pos[ni, 0], pos[ni, 1], pos[ni, 2], yaw[ni], nx, ny, nz, nyw, edge_resolution,
            spheres, boxes, min_clearance, has_world, gate_mode, gmodel,
            slots, factors, origin, voxel_size, dims,
            k2, k1, k0, zs, sig2, ell, mid, is_trace, trilinear, threshold,
            points, fx, fy, cx, cy, width, height, sigma, r_mount, vr, rot, p3,
        ):
            continue

        rn = gamma * (np.log(n + 1.0) / (n + 1.0)) ** 0.25
        if rn > rewire_radius:
            rn = rewire_radius
        m = _nb_collect_near(
            cstart, cid, cxyz, head, nxt, pos, yaw, n,
            lo, gcell, gnx, gny, gnz, gnw, nx, ny, nz, nyw, w_pos, w_yaw, rn, cidx, cdn,
        )

        # choose the cheapest valid parent in the neighborhood
        ddx = pos[ni, 0] - nx
        ddy = pos[ni, 1] - ny
        ddz = pos[ni, 2] - nz
        dni = w_pos * np.sqrt(ddx * ddx + ddy * ddy + ddz * ddz) + w_yaw * _nb_angdist(
            yaw[ni] - nyw
        )
        best_parent = ni
        best_cost = cost[ni] + dni
        for t in range(m):
            j = cidx[t]
            cand = cost[j] + cdn[t]
            if cand < best_cost:
                edge_checks += 1
                if _nb_edge_ok(
                    pos[j, 0], pos[j, 1], pos[j, 2], yaw[j], nx, ny, nz, nyw,
                    edge_resolution, spheres, boxes, min_clearance, has_world,
                    gate_mode, gmodel, slots, factors, origin, voxel_size, dims,
                    k2, k1, k0, zs, sig2, ell, mid, is_trace, trilinear, threshold,
                    points, fx, fy, cx, cy, width, height, sigma, r_mount, vr, rot, p3,
                ):
                    best_parent = j
                    best_cost = cand

        k = n
        pos[k, 0] = nx
        pos[k, 1] = ny
        pos[k, 2] = nz
        yaw[k] = nyw
        parent[k] = best_parent
        cost[k] = best_cost
        c = (
            (
                _nb_cell_axis(nx, lo[0], gcell, gnx) * gny
                + _nb_cell_axis(ny, lo[1], gcell, gny)
            ) * gnz + _nb_cell_axis(nz, lo[2], gcell, gnz)
        ) * gnw + _nb_yaw_cell(nyw, ywcell, gnw)
        nxt[k] = head[c]
        head[c] = k
        n += 1

        # rewire the neighborhood through the new vertex
        for t in range(m):
            j = cidx[t]
            cand = best_cost + cdn[t]
            if cand < cost[j]:
                edge_checks += 1
                if _nb_edge_ok(
                    nx, ny, nz, nyw, pos[j, 0], pos[j, 1], pos[j, 2], yaw[j],
                    edge_resolution, spheres, boxes, min_clearance, has_world,
                    gate_mode, gmodel, slots, factors, origin, voxel_size, dims,
                    k2, k1, k0, zs, sig2, ell, mid, is_trace, trilinear, threshold,
                    points, fx, fy, cx, cy, width, height, sigma, r_mount, vr, rot, p3,
                ):
                    parent[j] = k
                    cost[j] = cand

        # try to connect the new vertex to the goal
        gdx = gx - nx
        gdy = gy - ny
        gdz = gz - nz
        gd = w_pos * np.sqrt(gdx * gdx + gdy * gdy + gdz * gdz) + w_yaw * _nb_angdist(
            gyw - nyw
        )
        if gd <= connect_radius:
            total = best_cost + gd
            if total < goal_cost:
                edge_checks += 1
                if _nb_edge_ok(
                    nx, ny, nz, nyw, gx, gy, gz, gyw, edge_resolution,
                    spheres, boxes, min_clearance, has_world, gate_mode, gmodel,
                    slots, factors, origin, voxel_size, dims,
                    k2, k1, k0, zs, sig2, ell, mid, is_trace, trilinear, threshold,
                    points, fx, fy, cx, cy, width, height, sigma, r_mount, vr, rot, p3,
                ):
                    goal_parent = k
                    goal_cost = total

    state[0] = n
    state[1] = edge_checks
    state[2] = goal_parent
    state[3] += done
    goalv[4] = goal_cost
    return done


@njit(cache=True)
def _nb_metric_one(factors, row, vr, mid, is_trace):
    if row < 0:
        return 0.0
    if is_trace:
        val = 0.0
        for k in range(vr.shape[0]):
            val += vr[k] * factors[row, k]
        return val
    if mid == METRIC_TRACE:
        # the trace of the contraction touches only block diagonals
        val = 0.0
        for k in range(vr.shape[0]):
            b = k * 36
            val += vr[k] * (
                factors[row, b] + factors[row, b + 7] + factors[row, b + 14]
                + factors[row, b + 21] + factors[row, b + 28] + factors[row, b + 35]
            )
        return val
    work = np.empty(36)
    _nb_contract_into(factors, row, vr, work)
    return _nb_metric_of(work.reshape(6, 6), mid)


@njit(cache=True)
def _nb_query_metric(slots, factors, origin, voxel_size, dims, pos, vr, mid, is_trace, trilinear):
    if trilinear:
        gx = (pos[0] - origin[0]) / voxel_size - 0.5
        gy = (pos[1] - origin[1]) / voxel_size - 0.5
        gz = (pos[2] - origin[2]) / voxel_size - 0.5
        bx = int(np.floor(gx))
        by = int(np.floor(gy))
        bz = int(np.floor(gz))
        fxw = gx - bx
        fyw = gy - by
        fzw = gz - bz
        # exactly at the last voxel center: shift the cell down one step
        if bx + 1 == dims[0] and fxw == 0.0:
            bx -= 1
            fxw = 1.0
        if by + 1 == dims[1] and fyw == 0.0:
            by -= 1
            fyw = 1.0
        if bz + 1 == dims[2] and fzw == 0.0:
            bz -= 1
            fzw = 1.0
        if (
            bx < 0 or by < 0 or bz < 0
            or bx + 1 >= dims[0] or by + 1 >= dims[1] or bz + 1 >= dims[2]
        ):
            return 0.0, STATUS_OUT_OF_FIELD
        val = 0.0
        for dx in range(2):
            wx = fxw if dx == 1 else 1.0 - fxw
            for dy in range(2):
                wy = fyw if dy == 1 else 1.0 - fyw
                for dz in range(2):
                    wz = fzw if dz == 1 else 1.0 - fzw
                    wgt = wx * wy * wz
                    if wgt == 0.0:
                        continue
                    lin = ((bx + dx) * dims[1] + (by + dy)) * dims[2] + (bz + dz)
                    val += wgt * _nb_metric_one(factors, slots[lin], vr, mid, is_trace)
        return val, STATUS_OK
    lin = _nb_locate_nearest(origin, voxel_size, dims, pos[0], pos[1], pos[2])
    if lin < 0:
        return 0.0, STATUS_OUT_OF_FIELD
    return _nb_metric_one(factors, slots[lin], vr, mid, is_trace), STATUS_OK


@njit(cache=True)
def _nb_query_metric_quad(
    slots, factors, origin, voxel_size, dims, pos, z, k2, k1, k0, mid, is_trace, trilinear
):
    vr = np.empty(10)
    _nb_quad_vr_into(z[0], z[1], z[2], k2, k1, k0, vr)
    return _nb_query_metric(slots, factors, origin, voxel_size, dims, pos, vr, mid, is_trace, trilinear)


@njit(cache=True)
def _nb_query_metric_gp(
    slots, factors, origin, voxel_size, dims, pos, z, zs, sig2, ell, mid, is_trace, trilinear
):
    vr = np.empty(zs.shape[0])
    _nb_gp_vr_into(z[0], z[1], z[2], zs, sig2, ell, vr)
    return _nb_query_metric(slots, factors, origin, voxel_size, dims, pos, vr, mid, is_trace, trilinear)


@njit(cache=True)
def _nb_field_metric_batch_quad(
    slots, factors, origin, voxel_size, dims, positions, zs, k2, k1, k0, mid, is_trace, trilinear
):
    n = positions.shape[0]
    vals = np.empty(n)
    stat = np.empty(n, dtype=np.int64)
    vr = np.empty(10)
    for i in range(n):
        _nb_quad_vr_into(zs[i, 0], zs[i, 1], zs[i, 2], k2, k1, k0, vr)
        vals[i], stat[i] = _nb_query_metric(
            slots, factors, origin, voxel_size, dims, positions[i], vr, mid, is_trace, trilinear
        )
    return vals, stat


@njit(cache=True)
def _nb_field_metric_batch_gp(
    slots, factors, origin, voxel_size, dims, positions, zs, zsamp, sig2, ell, mid, is_trace, trilinear
):
    n = positions.shape[0]
    vals = np.empty(n)
    stat = np.empty(n, dtype=np.int64)
    vr = np.empty(zsamp.shape[0])
    for i in range(n):
        _nb_gp_vr_into(zs[i, 0], zs[i, 1], zs[i, 2], zsamp, sig2, ell, vr)
        vals[i], stat[i] = _nb_query_metric(
            slots, factors, origin, voxel_size, dims, positions[i], vr, mid, is_trace, trilinear
        )
    return vals, stat


# ──────────────────────────────────────────────────────────────────────
# backend dispatch
# ──────────────────────────────────────────────────────────────────────

_DEFAULT_BACKEND = "numba" if HAS_NUMBA else "numpy"
_active = os.environ.get("FIFIELD_BACKEND", _DEFAULT_BACKEND).strip().lower() or _DEFAULT_BACKEND


def available_backends() -> tuple[str, ...]:
    return ("numpy", "numba") if HAS_NUMBA else ("numpy",)


def get_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    name = name.strip().lower()
    if name not in available_backends():
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}")
    _active = name


if _active not in ("numpy", "numba"):
    raise ValueError(f"FIFIELD_BACKEND={_active!r} is not one of numpy|numba")
if _active == "numba" and not HAS_NUMBA:
    _active = "numpy"


def _use_numba() -> bool:
    return _active == "numba"


def landmark_fims(points: np.ndarray, cam_t: np.ndarray, sigma: float) -> np.ndarray:
    """(N,6,6) per-landmark informations (backend-independent helper)."""
    return _np_landmark_fims(points, np.asarray(cam_t, dtype=np.float64), sigma)


def quad_vp(u: np.ndarray) -> np.ndarray:
    return _np_quad_vp(u)


def quad_vr(z: np.ndarray, k2: float, k1: float, k0: float) -> np.ndarray:
    return _np_quad_vr(np.asarray(z, dtype=np.float64), k2, k1, k0)


def gp_vr(z: np.ndarray, zs: np.ndarray, sig2: float, ell: float) -> np.ndarray:
    return _np_gp_vr(np.asarray(z, dtype=np.float64), zs, sig2, ell)


def build_quad_factors(centers, points, sigma, k2, k1, k0, want_trace, mask=None, parallel=False):
    if _use_numba():
        use_mask = mask is not None
        m = mask if use_mask else np.zeros((1, 1), dtype=np.uint8)
        fn = _nb_build_quad_par if parallel else _nb_build_quad
        return fn(centers, points, sigma, k2, k1, k0, want_trace, m, use_mask)
    return _np_build_quad(centers, points, sigma, k2, k1, k0, want_trace, mask)


def build_gp_factors(centers, points, sigma, zs, kinv, ks, cos_alpha, want_trace, mask=None, parallel=False):
    if _use_numba():
        use_mask = mask is not None
        m = mask if use_mask else np.zeros((1, 1), dtype=np.uint8)
        return _nb_build_gp(centers, points, sigma, zs, kinv, ks, cos_alpha, want_trace, m, use_mask)
    return _np_build_gp(centers, points, sigma, zs, kinv, ks, cos_alpha, want_trace, mask)


def exact_fim(rot, t, points, fx, fy, cx, cy, width, height, sigma):
    if _use_numba():
        return _nb_exact_fim(rot, t, points, fx, fy, cx, cy, float(width), float(height), sigma)
    return _np_exact_fim(rot, t, points, fx, fy, cx, cy, float(width), float(height), sigma)


def pc_metric_yaw_batch(positions, yaws, points, cam, sigma, r_base, mid):
    """Exact point-cloud metric at yaw-only poses; cam = (fx,fy,cx,cy,w,h)."""
    if _use_numba():
        fx, fy, cx, cy, width, height = cam
        return _nb_pc_metric_yaw_batch(
            positions, yaws, points, fx, fy, cx, cy, float(width), float(height), sigma, r_base, mid
        )
    return _np_pc_metric_yaw_batch(positions, yaws, points, cam, sigma, r_base, mid)


def query_fim_quad(slots, factors, origin, voxel_size, dims, pos, z, k2, k1, k0, trilinear):
    if _use_numba():
        return _nb_query_fim_quad(slots, factors, origin, voxel_size, dims, pos, z, k2, k1, k0, trilinear)
    return _np_query_fim(slots, factors, origin, voxel_size, dims, pos, _np_quad_vr(z, k2, k1, k0), trilinear)


def query_fim_gp(slots, factors, origin, voxel_size, dims, pos, z, zs, sig2, ell, trilinear):
    if _use_numba():
        return _nb_query_fim_gp(slots, factors, origin, voxel_size, dims, pos, z, zs, sig2, ell, trilinear)
    return _np_query_fim(slots, factors, origin, voxel_size, dims, pos, _np_gp_vr(z, zs, sig2, ell), trilinear)


def query_fim_vr(slots, factors, origin, voxel_size, dims, pos, vr, trilinear):
    """FIM query from a caller-supplied rotation vector (any model)."""
    if _use_numba():
        return _nb_query_fim(slots, factors, origin, voxel_size, dims, pos, vr, trilinear)
    return _np_query_fim(slots, factors, origin, voxel_size, dims, pos, vr, trilinear)


def rrt_core_available() -> bool:
    """Whether the compiled planner inner loop can be used."""
    return _use_numba()


def rrt_chunk(*args):
    """Run one batch of planner iterations (numba backend only)."""
    return _nb_rrt_chunk(*args)


def exact_fim_batch(rots, ts, points, fx, fy, cx, cy, width, height, sigma):
    """(Q,6,6) exact FIMs for Q poses against one landmark set."""
    if _use_numba():
        return _nb_exact_fim_batch(rots, ts, points, fx, fy, cx, cy, float(width), float(height), sigma)
    out = np.empty((ts.shape[0], 6, 6))
    for i in range(ts.shape[0]):
        out[i] = _np_exact_fim(rots[i], ts[i], points, fx, fy, cx, cy, float(width), float(height), sigma)
    return out


def query_fim_batch_quad(slots, factors, origin, voxel_size, dims, positions, axes, k2, k1, k0, trilinear):
    if _use_numba():
        return _nb_query_fim_batch_quad(
            slots, factors, origin, voxel_size, dims, positions, axes, k2, k1, k0, trilinear
        )
    q = positions.shape[0]
    fims = np.empty((q, 6, 6))
    status = np.empty(q, dtype=np.int64)
    for i in range(q):
        fims[i], status[i] = _np_query_fim(
            slots, factors, origin, voxel_size, dims, positions[i],
            _np_quad_vr(axes[i], k2, k1, k0), trilinear,
        )
    return fims, status


def query_fim_batch_gp(slots, factors, origin, voxel_size, dims, positions, axes, zs, sig2, ell, trilinear):
    if _use_numba():
        return _nb_query_fim_batch_gp(
            slots, factors, origin, voxel_size, dims, positions, axes, zs, sig2, ell, trilinear
        )
    q = positions.shape[0]
    fims = np.empty((q, 6, 6))
    status = np.empty(q, dtype=np.int64)
    for i in range(q):
        fims[i], status[i] = _np_query_fim(
            slots, factors, origin, voxel_size, dims, positions[i],
            _np_gp_vr(axes[i], zs, sig2, ell), trilinear,
        )
    return fims, status


def query_metric_vr(slots, factors, origin, voxel_size, dims, pos, vr, mid, is_trace, trilinear):
    """Metric query from a caller-supplied rotation vector (any model)."""
    if _use_numba():
        return _nb_query_metric(slots, factors, origin, voxel_size, dims, pos, vr, mid, is_trace, trilinear)
    return _np_query_metric(slots, factors, origin, voxel_size, dims, pos, vr, mid, is_trace, trilinear)


def query_metric_quad(slots, factors, origin, voxel_size, dims, pos, z, k2, k1, k0, mid, is_trace, trilinear):
    if _use_numba():
        return _nb_query_metric_quad(
            slots, factors, origin, voxel_size, dims, pos, z, k2, k1, k0, mid, is_trace, trilinear
        )
    return _np_query_metric(
        slots, factors, origin, voxel_size, dims, pos, _np_quad_vr(z, k2, k1, k0), mid, is_trace, trilinear
    )


def query_metric_gp(slots, factors, origin, voxel_size, dims, pos, z, zs, sig2, ell, mid, is_trace, trilinear):
    if _use_numba():
        return _nb_query_metric_gp(
            slots, factors, origin, voxel_size, dims, pos, z, zs, sig2, ell, mid, is_trace, trilinear
        )
    return _np_query_metric(
        slots, factors, origin, voxel_size, dims, pos, _np_gp_vr(z, zs, sig2, ell), mid, is_trace, trilinear
    )


def field_metric_yaw_batch_quad(
    slots, factors, origin, voxel_size, dims, positions, zs, k2, k1, k0, mid, is_trace, trilinear
):
    if _use_numba():
        return _nb_field_metric_batch_quad(
            slots, factors, origin, voxel_size, dims, positions, zs, k2, k1, k0, mid, is_trace, trilinear
        )
    return _np_field_metric_batch_quad(
        slots, factors, origin, voxel_size, dims, positions, zs, k2, k1, k0, mid, is_trace, trilinear
    )


def field_metric_yaw_batch_gp(
    slots, factors, origin, voxel_size, dims, positions, zs, zsamp, sig2, ell, mid, is_trace, trilinear
):
    if _use_numba():
        return _nb_field_metric_batch_gp(
            slots, factors, origin, voxel_size, dims, positions, zs, zsamp, sig2, ell, mid, is_trace, trilinear
        )
    return _np_field_metric_batch_gp(
        slots, factors, origin, voxel_size, dims, positions, zs, zsamp, sig2, ell, mid, is_trace, trilinear
    )


def metric_of(fim: np.ndarray, mid: int) -> float:
    return _np_metric_of(np.asarray(fim, dtype=np.float64), mid)


def warmup() -> None:
    """Force-compile the numba kernels on tiny inputs (no-op for numpy)."""
    if not _use_numba():
        return
    centers = np.zeros((1, 3))
    points = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, -0.25]])
    zs = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
    kinv = np.eye(4)
    mask = np.ones((1, 2), dtype=np.uint8)
    # the parallel build variant compiles on first use instead; compiling it
    # here would drag in the threading layer even for serial runs
    for tr in (False, True):
        _nb_build_quad(centers, points, 1.0, 0.7, 0.5, -0.2, tr, mask, True)
        _nb_build_gp(centers, points, 1.0, zs, kinv, 15.0, 0.7, tr, mask, True)
    rot = np.eye(3)
    _nb_exact_fim(rot, np.zeros(3), points, 320.0, 320.0, 320.0, 240.0, 640.0, 480.0, 1.0)
    dims = np.array([1, 1, 1], dtype=np.int64)
    slots = np.zeros(1, dtype=np.int32)
    fq = np.zeros((1, 360))
    fg = np.zeros((1, 4 * 36))
    ft = np.zeros((1, 10))
    pos = np.zeros(3)
    z = np.array([0.0, 0.0, 1.0])
    origin = np.array([-0.5, -0.5, -0.5])
    _nb_query_fim_quad(slots, fq, origin, 1.0, dims, pos, z, 0.7, 0.5, -0.2, False)
    _nb_query_fim_gp(slots, fg, origin, 1.0, dims, pos, z, zs, 1.0, 0.5, False)
    for mid in (0, 1, 2):
        _nb_query_metric_quad(slots, fq, origin, 1.0, dims, pos, z, 0.7, 0.5, -0.2, mid, False, False)
        _nb_query_metric_gp(slots, fg, origin, 1.0, dims, pos, z, zs, 1.0, 0.5, mid, False, False)
    _nb_query_metric_quad(slots, ft, origin, 1.0, dims, pos, z, 0.7, 0.5, -0.2, 2, True, False)
    posb = np.zeros((2, 3))
    zsb = np.tile(z, (2, 1))
    _nb_field_metric_batch_quad(slots, fq, origin, 1.0, dims, posb, zsb, 0.7, 0.5, -0.2, 0, False, False)
    _nb_field_metric_batch_gp(slots, fg, origin, 1.0, dims, posb, zsb, zs, 1.0, 0.5, 0, False, False)
    _nb_pc_metric_yaw_batch(
        posb, np.zeros(2), points, 320.0, 320.0, 320.0, 240.0, 640.0, 480.0, 1.0, np.eye(3), 0
    )
    rotb = np.stack((rot, rot))
    _nb_exact_fim_batch(rotb, posb, points, 320.0, 320.0, 320.0, 240.0, 640.0, 480.0, 1.0)
    _nb_query_fim_batch_quad(slots, fq, origin, 1.0, dims, posb, zsb, 0.7, 0.5, -0.2, False)
    _nb_query_fim_batch_gp(slots, fg, origin, 1.0, dims, posb, zsb, zs, 1.0, 0.5, False)
    tp = np.zeros((8, 3))
    ty = np.zeros(8)
    tparent = np.full(8, -1, dtype=np.int64)
    tcost = np.zeros(8)
    tstate = np.array([1, 0, -1, 0], dtype=np.int64)
    tgoal = np.array([0.2, 0.2, 0.2, 0.0, np.inf])
    thead = np.full(16, -1, dtype=np.int64)
    tnxt = np.full(8, -1, dtype=np.int64)
    tcidx = np.empty(8, dtype=np.int64)
    tcdn = np.empty(8)
    tcstart = np.zeros(17, dtype=np.int64)
    tcid = np.empty(8, dtype=np.int64)
    tcxyz = np.empty((8, 4))
    _nb_rrt_chunk(
        tp, ty, tparent, tcost, tstate, tgoal,
        tcstart, tcid, tcxyz, thead, tnxt, tcidx, tcdn,
        np.zeros(3), np.ones(3), 0.5, 2, 2, 2, 2, 1, np.inf,
        0.5, 0.5, 1.0, 0.25, 0.1, 1.0, 1.0,
        2, 1,
        np.empty((0, 4)), np.empty((0, 6)), 0.0,
        1, 1,
        slots, fq, origin, 1.0, dims,
        0.7, 0.5, -0.2, zs, 1.0, 0.5, 2, False, False, -np.inf,
        points, 320.0, 320.0, 320.0, 240.0, 640.0, 480.0, 1.0, np.eye(3),
    )
