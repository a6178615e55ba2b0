"""Parity between the numba fast path and the pure-numpy fallback kernels."""

import subprocess
import sys

import numpy as np
import pytest

from softbubble import _accel
from softbubble.membrane import BubbleConfig, cfg_rhs, grid_for, sentinel_obstacle
from softbubble.objects import cube_mesh

needs_numba = pytest.mark.skipif(
    not _accel.HAVE_NUMBA, reason="numba not active in this process"
)


def sweep_inputs():
    cfg = BubbleConfig(grid_spacing=2.0)
    grid = grid_for(cfg)
    rng = np.random.default_rng(0)
    shape = (grid.n, grid.n)
    z = np.where(grid.interior, rng.uniform(0.0, 40.0, shape), 0.0)
    phi = np.where(grid.interior, rng.uniform(30.0, 60.0, shape), 0.0)
    rhs = np.where(grid.interior, cfg_rhs(cfg), 0.0)
    return z, phi, grid, rhs


@needs_numba
class TestParity:
    def test_psor_sweep(self):
        z, phi, grid, rhs = sweep_inputs()
        z_np = z.copy()
        z_nb = z.copy()
        args = (phi, grid.c_e, grid.c_w, grid.c_n, grid.c_s, grid.diag, rhs,
                grid.red, grid.black, 1.8)
        for _ in range(5):
            d_np = _accel.psor_sweep_np(z_np, *args)
            d_nb = _accel._psor_sweep_nb(z_nb, *args)
            assert d_np == d_nb
            assert np.array_equal(z_np, z_nb)

    def test_raycast_heightfield(self):
        xs = np.arange(-25.0, 26.0)
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        field = np.clip(40.0 * (1.0 - (gx**2 + gy**2) / 24.0**2), 0.0, None)
        aa, bb = np.meshgrid(
            np.linspace(-0.2, 0.2, 17), np.linspace(-0.15, 0.15, 13), indexing="ij"
        )
        args = (aa, bb, 104.0, field, -25.0, 1.0, 45.0, 24.0, 64, 30)
        out_np = _accel.raycast_heightfield_np(*args)
        out_nb = _accel._raycast_heightfield_nb(*args)
        assert np.array_equal(out_np, out_nb)
        assert (out_np > 0).any() and (out_np == 0).any()

    def test_rasterize_min_height(self):
        mesh = cube_mesh()
        xs = np.arange(-30.0, 31.0, 1.5)
        args = (mesh.vertices, mesh.triangles, xs, xs, 1e6)
        out_np = _accel.rasterize_min_height_np(*args)
        out_nb = _accel._rasterize_min_height_nb(*args)
        assert np.array_equal(out_np, out_nb)
        assert (out_np < 1e6).any()


def test_env_flag_disables_numba():
    code = (
        "from softbubble import _accel;"
        "assert not _accel.HAVE_NUMBA;"
        "assert _accel.psor_sweep is _accel.psor_sweep_np"
    )
    subprocess.run(
        [sys.executable, "-c", code],
        check=True,
        env={"PATH": "/usr/bin:/bin", "SOFTBUBBLE_DISABLE_NUMBA": "1"},
    )


def test_sentinel_obstacle_shape():
    cfg = BubbleConfig(grid_spacing=2.0)
    phi = sentinel_obstacle(cfg)
    g = grid_for(cfg)
    assert phi.phi.shape == (g.n, g.n)
