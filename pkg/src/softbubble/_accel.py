"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Set the environment variable ``SOFTBUBBLE_DISABLE_NUMBA=1`` to force the
numpy implementations (useful on platforms where numba is unavailable and
for benchmarking; see benchmarks/bench_accel.py). Both paths execute the
same arithmetic per element, so results are bit-identical.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("SOFTBUBBLE_DISABLE_NUMBA", "").strip() not in ("", "0")

try:
    if _DISABLE:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# Projected red-black SOR sweep for the membrane obstacle problem.
# Coefficient arrays carry the boundary-fitted (Shortley-Weller) stencil;
# couplings to nodes outside the rim disk are zero.


def psor_sweep_np(z, phi, c_e, c_w, c_n, c_s, diag, rhs, red, black, omega):
    max_delta = 0.0
    for mask in (red, black):
        z_e = np.roll(z, -1, 0)
        z_w = np.roll(z, 1, 0)
        z_n = np.roll(z, -1, 1)
        z_s = np.roll(z, 1, 1)
        gs = (c_e * z_e + c_w * z_w + c_n * z_n + c_s * z_s + rhs) / diag
        z_new = np.minimum(phi, z + omega * (gs - z))
        delta = np.abs(z_new - z)[mask]
        if delta.size:
            max_delta = max(max_delta, float(delta.max()))
        z[mask] = z_new[mask]
    return max_delta


if HAVE_NUMBA:

    @njit(cache=True)
    def _psor_sweep_nb(z, phi, c_e, c_w, c_n, c_s, diag, rhs, red, black, omega):
        ni, nj = z.shape
        max_delta = 0.0
        for parity in range(2):
            mask = red if parity == 0 else black
            for i in range(1, ni - 1):
                for j in range(1, nj - 1):
                    if not mask[i, j]:
                        continue
                    gs = (
                        c_e[i, j] * z[i + 1, j]
                        + c_w[i, j] * z[i - 1, j]
                        + c_n[i, j] * z[i, j + 1]
                        + c_s[i, j] * z[i, j - 1]
                        + rhs[i, j]
                    ) / diag[i, j]
                    z_new = z[i, j] + omega * (gs - z[i, j])
                    if z_new > phi[i, j]:
                        z_new = phi[i, j]
                    d = abs(z_new - z[i, j])
                    if d > max_delta:
                        max_delta = d
                    z[i, j] = z_new
        return max_delta

    psor_sweep = _psor_sweep_nb
else:
    psor_sweep = psor_sweep_np


# ---------------------------------------------------------------------------
# Height-field ray casting for the internal depth camera.
# The camera sits on the bubble axis at z = -standoff looking along +z; a
# pixel ray is parameterized by z so that the z-distance depth convention
# falls out directly: point(z) = ((z+c)*a, (z+c)*b, z).


def _bilinear_np(field, gx, gy):
    n_i, n_j = field.shape
    ix = np.clip(np.floor(gx).astype(np.int64), 0, n_i - 2)
    iy = np.clip(np.floor(gy).astype(np.int64), 0, n_j - 2)
    fx = np.clip(gx - ix, 0.0, 1.0)
    fy = np.clip(gy - iy, 0.0, 1.0)
    v00 = field[ix, iy]
    v10 = field[ix + 1, iy]
    v01 = field[ix, iy + 1]
    v11 = field[ix + 1, iy + 1]
    return (
        v00 * (1.0 - fx) * (1.0 - fy)
        + v10 * fx * (1.0 - fy)
        + v01 * (1.0 - fx) * fy
        + v11 * fx * fy
    )


def raycast_heightfield_np(
    ray_a, ray_b, standoff, field, x0, spacing, z_top, r_valid, n_march, n_bisect
):
    shape = ray_a.shape
    a = ray_a.ravel()
    b = ray_b.ravel()

    def f_of(z):
        x = (z + standoff) * a
        y = (z + standoff) * b
        g = _bilinear_np(field, (x - x0) / spacing, (y - x0) / spacing)
        return z - g

    # coarse march to bracket the first upward crossing of the surface
    lo = np.zeros_like(a)
    hi = np.full_like(a, z_top)
    found = np.zeros(a.shape, dtype=np.bool_)
    prev = np.zeros_like(a)
    for k in range(n_march):
        zk = z_top * k / (n_march - 1)
        fk = f_of(np.full_like(a, zk))
        cross = (~found) & (fk >= 0.0)
        lo[cross] = prev[cross]
        hi[cross] = zk
        found |= cross
        prev = np.full_like(a, zk)
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        fm = f_of(mid)
        take = fm >= 0.0
        hi[take] = mid[take]
        lo[~take] = mid[~take]
    z_hit = hi
    x = (z_hit + standoff) * a
    y = (z_hit + standoff) * b
    depth = z_hit + standoff
    invalid = (~found) | (x * x + y * y > r_valid * r_valid)
    depth[invalid] = 0.0
    return depth.reshape(shape)


if HAVE_NUMBA:

    @njit(cache=True)
    def _bilinear_nb(field, gx, gy):
        n_i, n_j = field.shape
        ix = int(np.floor(gx))
        iy = int(np.floor(gy))
        if ix < 0:
            ix = 0
        if ix > n_i - 2:
            ix = n_i - 2
        if iy < 0:
            iy = 0
        if iy > n_j - 2:
            iy = n_j - 2
        fx = gx - ix
        fy = gy - iy
        if fx < 0.0:
            fx = 0.0
        if fx > 1.0:
            fx = 1.0
        if fy < 0.0:
            fy = 0.0
        if fy > 1.0:
            fy = 1.0
        return (
            field[ix, iy] * (1.0 - fx) * (1.0 - fy)
            + field[ix + 1, iy] * fx * (1.0 - fy)
            + field[ix, iy + 1] * (1.0 - fx) * fy
            + field[ix + 1, iy + 1] * fx * fy
        )

    @njit(cache=True)
    def _raycast_heightfield_nb(
        ray_a, ray_b, standoff, field, x0, spacing, z_top, r_valid, n_march, n_bisect
    ):
        out = np.zeros(ray_a.shape, dtype=np.float64)
        ni, nj = ray_a.shape
        for i in range(ni):
            for j in range(nj):
                a = ray_a[i, j]
                b = ray_b[i, j]
                lo = 0.0
                hi = z_top
                found = False
                prev = 0.0
                for k in range(n_march):
                    zk = z_top * k / (n_march - 1)
                    x = (zk + standoff) * a
                    y = (zk + standoff) * b
                    fk = zk - _bilinear_nb(field, (x - x0) / spacing, (y - x0) / spacing)
                    if (not found) and fk >= 0.0:
                        lo = prev
                        hi = zk
                        found = True
                    prev = zk
                if not found:
                    continue
                for _ in range(n_bisect):
                    mid = 0.5 * (lo + hi)
                    x = (mid + standoff) * a
                    y = (mid + standoff) * b
                    fm = mid - _bilinear_nb(
                        field, (x - x0) / spacing, (y - x0) / spacing
                    )
                    if fm >= 0.0:
                        hi = mid
                    else:
                        lo = mid
                z_hit = hi
                x = (z_hit + standoff) * a
                y = (z_hit + standoff) * b
                if x * x + y * y > r_valid * r_valid:
                    continue
                out[i, j] = z_hit + standoff
        return out

    raycast_heightfield = _raycast_heightfield_nb
else:
    raycast_heightfield = raycast_heightfield_np


# ---------------------------------------------------------------------------
# Obstacle rasterization: lowest mesh surface height above each grid node,
# scanning triangles and interpolating height barycentrically in the xy plane.


def rasterize_min_height_np(vertices, triangles, xs, ys, sentinel):
    phi = np.full((xs.size, ys.size), sentinel, dtype=np.float64)
    for t in range(triangles.shape[0]):
        v0 = vertices[triangles[t, 0]]
        v1 = vertices[triangles[t, 1]]
        v2 = vertices[triangles[t, 2]]
        d = (v1[1] - v2[1]) * (v0[0] - v2[0]) + (v2[0] - v1[0]) * (v0[1] - v2[1])
        if abs(d) < 1e-12:
            continue
        lo_x = min(v0[0], v1[0], v2[0])
        hi_x = max(v0[0], v1[0], v2[0])
        lo_y = min(v0[1], v1[1], v2[1])
        hi_y = max(v0[1], v1[1], v2[1])
        i0 = int(np.searchsorted(xs, lo_x - 1e-9))
        i1 = int(np.searchsorted(xs, hi_x + 1e-9))
        j0 = int(np.searchsorted(ys, lo_y - 1e-9))
        j1 = int(np.searchsorted(ys, hi_y + 1e-9))
        if i0 >= i1 or j0 >= j1:
            continue
        gx = xs[i0:i1][:, None]
        gy = ys[j0:j1][None, :]
        w0 = ((v1[1] - v2[1]) * (gx - v2[0]) + (v2[0] - v1[0]) * (gy - v2[1])) / d
        w1 = ((v2[1] - v0[1]) * (gx - v2[0]) + (v0[0] - v2[0]) * (gy - v2[1])) / d
        w2 = 1.0 - w0 - w1
        inside = (w0 >= -1e-9) & (w1 >= -1e-9) & (w2 >= -1e-9)
        h = w0 * v0[2] + w1 * v1[2] + w2 * v2[2]
        block = phi[i0:i1, j0:j1]
        np.minimum(block, np.where(inside, h, sentinel), out=block)
    return phi


if HAVE_NUMBA:

    @njit(cache=True)
    def _rasterize_min_height_nb(vertices, triangles, xs, ys, sentinel):
        phi = np.full((xs.size, ys.size), sentinel, dtype=np.float64)
        x_min = xs[0]
        y_min = ys[0]
        dx = xs[1] - xs[0] if xs.size > 1 else 1.0
        for t in range(triangles.shape[0]):
            v0 = vertices[triangles[t, 0]]
            v1 = vertices[triangles[t, 1]]
            v2 = vertices[triangles[t, 2]]
            d = (v1[1] - v2[1]) * (v0[0] - v2[0]) + (v2[0] - v1[0]) * (v0[1] - v2[1])
            if abs(d) < 1e-12:
                continue
            lo_x = min(v0[0], min(v1[0], v2[0]))
            hi_x = max(v0[0], max(v1[0], v2[0]))
            lo_y = min(v0[1], min(v1[1], v2[1]))
            hi_y = max(v0[1], max(v1[1], v2[1]))
            i0 = max(0, int(np.ceil((lo_x - 1e-9 - x_min) / dx)))
            i1 = min(xs.size, int(np.floor((hi_x + 1e-9 - x_min) / dx)) + 1)
            j0 = max(0, int(np.ceil((lo_y - 1e-9 - y_min) / dx)))
            j1 = min(ys.size, int(np.floor((hi_y + 1e-9 - y_min) / dx)) + 1)
            for i in range(i0, i1):
                for j in range(j0, j1):
                    gx = xs[i]
                    gy = ys[j]
                    w0 = (
                        (v1[1] - v2[1]) * (gx - v2[0]) + (v2[0] - v1[0]) * (gy - v2[1])
                    ) / d
                    w1 = (
                        (v2[1] - v0[1]) * (gx - v2[0]) + (v0[0] - v2[0]) * (gy - v2[1])
                    ) / d
                    w2 = 1.0 - w0 - w1
                    if w0 >= -1e-9 and w1 >= -1e-9 and w2 >= -1e-9:
                        h = w0 * v0[2] + w1 * v1[2] + w2 * v2[2]
                        if h < phi[i, j]:
                            phi[i, j] = h
            # fall through to next triangle
        return phi

    rasterize_min_height = _rasterize_min_height_nb
else:
    rasterize_min_height = rasterize_min_height_np
