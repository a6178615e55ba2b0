"""Benchmark the numba fast-path kernels against the pure-numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_accel.py

The numba path is compared in-process against the `_np` reference
implementations; set SOFTBUBBLE_DISABLE_NUMBA=1 to confirm the package
still runs (slower) without numba at all.
"""

import time

import numpy as np

from softbubble import _accel
from softbubble.membrane import BubbleConfig, cfg_rhs, grid_for
from softbubble.objects import six_object_library
from softbubble.render import SensorRig


def timeit(fn, repeats=5):
    fn()  # warm-up (includes numba JIT compilation)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_psor():
    cfg = BubbleConfig()
    grid = grid_for(cfg)
    rng = np.random.default_rng(0)
    z0 = np.where(grid.interior, rng.uniform(0.0, 40.0, (grid.n, grid.n)), 0.0)
    phi = np.where(grid.interior, 60.0, 0.0)
    rhs = cfg_rhs(cfg)
    args = (phi, grid.c_e, grid.c_w, grid.c_n, grid.c_s, grid.diag, rhs,
            grid.red, grid.black, 1.8)

    def run(kernel):
        z = z0.copy()
        for _ in range(100):
            kernel(z, *args)

    return {
        "numpy": timeit(lambda: run(_accel.psor_sweep_np)),
        "numba": timeit(lambda: run(_accel.psor_sweep))
        if _accel.HAVE_NUMBA
        else None,
    }


def bench_raycast():
    rig = SensorRig()
    cfg = rig.bubble
    grid = grid_for(cfg)
    from softbubble.membrane import rest_shape

    field = rest_shape(cfg).z
    cam = rig.camera
    us = (np.arange(cam.width) + 0.5 - cam.cx) / cam.fx
    vs = (np.arange(cam.height) + 0.5 - cam.cy) / cam.fy
    aa, bb = np.meshgrid(us, vs, indexing="xy")
    args = (aa, bb, rig.standoff, field, grid.xs[0], grid.spacing,
            cfg.inflation_height + 1.0, cfg.rim_radius, 64, 40)
    return {
        "numpy": timeit(lambda: _accel.raycast_heightfield_np(*args)),
        "numba": timeit(lambda: _accel.raycast_heightfield(*args))
        if _accel.HAVE_NUMBA
        else None,
    }


def bench_rasterize():
    mesh = six_object_library().meshes["frustum"]
    cfg = BubbleConfig()
    grid = grid_for(cfg)
    args = (mesh.vertices, mesh.triangles, grid.xs, grid.xs, 1e6)
    return {
        "numpy": timeit(lambda: _accel.rasterize_min_height_np(*args)),
        "numba": timeit(lambda: _accel.rasterize_min_height(*args))
        if _accel.HAVE_NUMBA
        else None,
    }


def main():
    print(f"numba active: {_accel.HAVE_NUMBA}")
    benches = {
        "psor_sweep (100 sweeps, 1 mm grid)": bench_psor,
        "raycast_heightfield (224x171 frame)": bench_raycast,
        "rasterize_min_height (frustum mesh)": bench_rasterize,
    }
    for name, fn in benches.items():
        res = fn()
        np_s = res["numpy"]
        line = f"{name:40s} numpy {np_s * 1e3:9.2f} ms"
        if res["numba"] is not None:
            nb_s = res["numba"]
            line += f"   numba {nb_s * 1e3:9.2f} ms   speedup {np_s / nb_s:6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
