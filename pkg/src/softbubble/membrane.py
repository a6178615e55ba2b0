"""Quasi-static membrane mechanics: pressure-loaded linear-tension membrane
with a rigid unilateral obstacle, solved by projected red-black SOR on a
boundary-fitted Cartesian grid over the rim disk."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _accel
from .geometry import RigidTransform, TriangleMesh

SENTINEL = np.inf  # obstacle height where no object overhangs a node

PSI_TO_PA = 6894.757


class MembraneError(RuntimeError):
    pass


@dataclass(frozen=True)
class BubbleConfig:
    """Physical identity of the sensor membrane.

    Tension is calibrated so the free (no-contact) apex equals the configured
    inflation height: T = p R^2 / (4 h), with the rest shape a paraboloid
    z(r) = h (1 - r^2/R^2).
    """

    rim_radius: float = 76.29  # mm
    inflation_height: float = 50.0  # mm, 20..75
    pressure: float = 1723.7  # Pa (0.25 psi)
    grid_spacing: float = 1.0  # mm

    def __post_init__(self):
        if not 20.0 <= self.inflation_height <= 75.0:
            raise ValueError("inflation height must be within 20..75 mm")
        if self.pressure <= 0 or self.rim_radius <= 0 or self.grid_spacing <= 0:
            raise ValueError("pressure, rim radius and grid spacing must be positive")

    @property
    def tension(self) -> float:
        """Membrane tension in N/m."""
        r_m = self.rim_radius / 1000.0
        h_m = self.inflation_height / 1000.0
        return self.pressure * r_m * r_m / (4.0 * h_m)

    @property
    def load(self) -> float:
        """p/T expressed per mm: the constant -laplacian of the rest shape."""
        return self.pressure / self.tension / 1000.0

    def rest_height(self, r):
        """Closed-form rest membrane height at radius r (mm)."""
        r = np.asarray(r, dtype=np.float64)
        h, rr = self.inflation_height, self.rim_radius
        return np.maximum(h * (1.0 - (r * r) / (rr * rr)), 0.0)

    def rest_surface_area(self) -> float:
        """Paraboloid surface area in mm^2 (closed form)."""
        h, rr = self.inflation_height, self.rim_radius
        k = 2.0 * h / (rr * rr)
        return 2.0 * math.pi / (3.0 * k * k) * ((1.0 + (k * rr) ** 2) ** 1.5 - 1.0)


class MembraneGrid:
    """Cartesian grid over the rim disk with Shortley-Weller boundary stencil."""

    def __init__(self, rim_radius: float, spacing: float):
        self.rim_radius = rim_radius
        self.spacing = spacing
        half = int(math.floor(rim_radius / spacing)) + 1
        self.n = 2 * half + 1
        self.xs = (np.arange(self.n) - half) * spacing
        x = self.xs[:, None]
        y = self.xs[None, :]
        r2 = x * x + y * y
        rr2 = rim_radius * rim_radius
        self.interior = r2 < rr2
        # padding ring is strictly outside the disk by construction
        assert not self.interior[0].any() and not self.interior[:, 0].any()

        def arm(nx, ny):
            # fractional distance along the axis to the rim circle where the
            # neighbor lies outside the disk; 1 for interior neighbors
            out = nx * nx + ny * ny >= rr2
            dx = nx - x
            dy = ny - y
            a_q = dx * dx + dy * dy
            b_q = 2.0 * (x * dx + y * dy)
            c_q = r2 - rr2
            disc = np.maximum(b_q * b_q - 4.0 * a_q * c_q, 0.0)
            t = (-b_q + np.sqrt(disc)) / (2.0 * a_q)
            return np.where(out, np.clip(t, 1e-3, 1.0), 1.0), out

        a_e, out_e = arm(x + spacing, y)
        a_w, out_w = arm(x - spacing, y)
        a_n, out_n = arm(x, y + spacing)
        a_s, out_s = arm(x, y - spacing)
        self.c_e = np.where(out_e, 0.0, 2.0 / (a_e * (a_e + a_w)))
        self.c_w = np.where(out_w, 0.0, 2.0 / (a_w * (a_e + a_w)))
        self.c_n = np.where(out_n, 0.0, 2.0 / (a_n * (a_n + a_s)))
        self.c_s = np.where(out_s, 0.0, 2.0 / (a_s * (a_n + a_s)))
        self.diag = 2.0 / (a_e * a_w) + 2.0 / (a_n * a_s)
        ii, jj = np.meshgrid(np.arange(self.n), np.arange(self.n), indexing="ij")
        self.red = ((ii + jj) % 2 == 0) & self.interior
        self.black = ((ii + jj) % 2 == 1) & self.interior

    def meshgrid(self):
        return np.meshgrid(self.xs, self.xs, indexing="ij")


@lru_cache(maxsize=8)
def _grid_cached(rim_radius: float, spacing: float) -> MembraneGrid:
    return MembraneGrid(rim_radius, spacing)


def grid_for(cfg: BubbleConfig) -> MembraneGrid:
    return _grid_cached(cfg.rim_radius, cfg.grid_spacing)


@dataclass
class HeightField:
    """Solved membrane surface over the rim disk (mm above the rim plane)."""

    cfg: BubbleConfig
    z: np.ndarray
    contact: np.ndarray | None = None

    @property
    def grid(self) -> MembraneGrid:
        return grid_for(self.cfg)

    @property
    def apex(self) -> float:
        n = self.grid.n
        return float(self.z[n // 2, n // 2])


@dataclass
class ObstacleField:
    cfg: BubbleConfig
    phi: np.ndarray

    @property
    def grid(self) -> MembraneGrid:
        return grid_for(self.cfg)


def sentinel_obstacle(cfg: BubbleConfig) -> ObstacleField:
    g = grid_for(cfg)
    return ObstacleField(cfg, np.full((g.n, g.n), SENTINEL))


def rest_shape(cfg: BubbleConfig) -> HeightField:
    g = grid_for(cfg)
    x, y = g.meshgrid()
    z = np.where(g.interior, cfg.rest_height(np.sqrt(x * x + y * y)), 0.0)
    return HeightField(cfg, z, contact=np.zeros_like(z, dtype=bool))


def build_obstacle(
    mesh: TriangleMesh, pose: RigidTransform, cfg: BubbleConfig
) -> ObstacleField:
    """Lowest object surface height above each grid node (downward ray cast
    equivalent, rasterized per triangle)."""
    g = grid_for(cfg)
    posed = mesh.transformed(pose)
    phi = _accel.rasterize_min_height(
        np.ascontiguousarray(posed.vertices),
        np.ascontiguousarray(posed.triangles),
        g.xs,
        g.xs,
        SENTINEL,
    )
    finite = np.isfinite(phi)
    if (phi[finite & g.interior] <= 0.0).any():
        raise MembraneError("object intersects the rim plane")
    phi[~g.interior] = SENTINEL
    return ObstacleField(cfg, phi)


def membrane_energy(cfg: BubbleConfig, z: np.ndarray) -> float:
    """Discrete objective (per unit tension): sum h^2 (|grad z|^2/2 - q z)."""
    g = grid_for(cfg)
    h = g.spacing
    zz = np.where(g.interior, z, 0.0)
    gx = (zz[1:, :] - zz[:-1, :]) / h
    gy = (zz[:, 1:] - zz[:, :-1]) / h
    dirichlet = 0.5 * (np.sum(gx * gx) + np.sum(gy * gy)) * h * h
    return float(dirichlet - cfg.load * np.sum(zz) * h * h)


def solve_membrane(
    cfg: BubbleConfig,
    obstacle: ObstacleField,
    *,
    omega: float = 1.8,
    tol: float = 1e-4,
    max_sweeps: int = 50_000,
    contact_tol: float = 0.05,
    on_sweep=None,
) -> HeightField:
    """Projected SOR solve of the obstacle problem; raises on non-convergence."""
    g = grid_for(cfg)
    phi = obstacle.phi
    rest = rest_shape(cfg).z
    z = np.where(g.interior, np.minimum(rest, phi), 0.0)
    rhs = np.where(g.interior, cfg.load * g.spacing * g.spacing, 0.0)
    delta = math.inf
    for sweep in range(max_sweeps):
        delta = _accel.psor_sweep(
            z, phi, g.c_e, g.c_w, g.c_n, g.c_s, g.diag, rhs, g.red, g.black, omega
        )
        if on_sweep is not None:
            on_sweep(sweep, z, delta)
        if delta < tol:
            break
    else:
        raise MembraneError(
            f"PSOR did not converge in {max_sweeps} sweeps (last update {delta:.3e} mm)"
        )
    hf = HeightField(cfg, z)
    hf.contact = contact_mask(hf, obstacle, contact_tol)
    return hf


def contact_mask(hf: HeightField, obstacle: ObstacleField, tol: float) -> np.ndarray:
    g = hf.grid
    return g.interior & (obstacle.phi - hf.z <= tol)


def kkt_residuals(hf: HeightField, obstacle: ObstacleField, contact_tol: float = 1e-3):
    """Complementarity check in solver units (projected-GS update, mm).

    Returns (max |update| over nodes strictly below the obstacle,
             max positive unprojected update over all nodes).
    The second value bounds how far the unconstrained equation would push the
    membrane past equilibrium; at contact nodes a positive residual is absorbed
    by the obstacle, so only its projected part must vanish.
    """
    g = hf.grid
    z = hf.z
    gs = (
        g.c_e * np.roll(z, -1, 0)
        + g.c_w * np.roll(z, 1, 0)
        + g.c_n * np.roll(z, -1, 1)
        + g.c_s * np.roll(z, 1, 1)
        + cfg_rhs(hf.cfg)
    ) / g.diag
    update = np.where(g.interior, np.minimum(obstacle.phi, gs) - z, 0.0)
    free = g.interior & (obstacle.phi - z > contact_tol)
    free_resid = float(np.abs(np.where(free, gs - z, 0.0)).max())
    onesided = float(np.abs(update).max())
    return free_resid, onesided


def cfg_rhs(cfg: BubbleConfig) -> np.ndarray:
    g = grid_for(cfg)
    return np.where(g.interior, cfg.load * g.spacing * g.spacing, 0.0)
