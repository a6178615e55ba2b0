"""Procedural object library: distinctly shaped blocks for classification and
pose experiments. All meshes live in an object frame with the contact face at
z = 0 (lowest surface) and are sized at 40 mm scale."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .geometry import PointCloud, TriangleMesh

NO_TOUCH = "no_touch"


def _quad(a, b, c, d):
    return [[a, b, c], [a, c, d]]


def box_mesh(w=40.0, d=40.0, h=40.0, center=(0.0, 0.0)) -> TriangleMesh:
    cx, cy = center
    x0, x1 = cx - w / 2, cx + w / 2
    y0, y1 = cy - d / 2, cy + d / 2
    v = [
        [x0, y0, 0], [x1, y0, 0], [x1, y1, 0], [x0, y1, 0],
        [x0, y0, h], [x1, y0, h], [x1, y1, h], [x0, y1, h],
    ]
    t = (
        _quad(0, 1, 2, 3)
        + _quad(4, 7, 6, 5)
        + _quad(0, 4, 5, 1)
        + _quad(1, 5, 6, 2)
        + _quad(2, 6, 7, 3)
        + _quad(3, 7, 4, 0)
    )
    return TriangleMesh(v, t)


def frustum_mesh(base=68.0, top=20.0, height=12.0) -> TriangleMesh:
    """Pyramidal frustum, small face down (the assumed contact face).

    Squat proportions keep the wall slope below the membrane's climb slope at
    the contact edge, so a deep press wraps the walls and the sensed cloud
    constrains all six pose degrees of freedom."""
    b, t = top / 2, base / 2  # bottom is the small face
    v = [
        [-b, -b, 0], [b, -b, 0], [b, b, 0], [-b, b, 0],
        [-t, -t, height], [t, -t, height], [t, t, height], [-t, t, height],
    ]
    tris = (
        _quad(0, 1, 2, 3)
        + _quad(4, 7, 6, 5)
        + _quad(0, 4, 5, 1)
        + _quad(1, 5, 6, 2)
        + _quad(2, 6, 7, 3)
        + _quad(3, 7, 4, 0)
    )
    return TriangleMesh(v, tris)


def prism_mesh(width=56.0, length=64.0, ridge_height=18.0) -> TriangleMesh:
    """Triangular prism presented ridge down, rectangular face up.

    The shallow V leaves a strongly oriented groove imprint, and its flank
    slope stays below the membrane climb slope so deep presses wrap it."""
    v = [
        [0, -length / 2, 0],
        [width / 2, -length / 2, ridge_height],
        [-width / 2, -length / 2, ridge_height],
        [0, length / 2, 0],
        [width / 2, length / 2, ridge_height],
        [-width / 2, length / 2, ridge_height],
    ]
    tris = [[0, 1, 2], [3, 5, 4]] + _quad(0, 3, 4, 1) + _quad(1, 4, 5, 2) + _quad(2, 5, 3, 0)
    return TriangleMesh(v, tris)


def cylinder_mesh(radius=9.0, height=40.0, segments=48) -> TriangleMesh:
    verts = []
    for z in (0.0, height):
        for k in range(segments):
            a = 2 * math.pi * k / segments
            verts.append([radius * math.cos(a), radius * math.sin(a), z])
    verts.append([0.0, 0.0, 0.0])
    verts.append([0.0, 0.0, height])
    c0, c1 = 2 * segments, 2 * segments + 1
    tris = []
    for k in range(segments):
        k1 = (k + 1) % segments
        tris.append([c0, k1, k])
        tris.append([c1, segments + k, segments + k1])
        tris += _quad(k, k1, segments + k1, segments + k)
    return TriangleMesh(verts, tris)


def l_block_mesh(size=64.0, arm=18.0, height=40.0) -> TriangleMesh:
    """L-shaped block as two merged boxes."""
    a = box_mesh(size, arm, height, center=(0.0, -(size - arm) / 2))
    b = box_mesh(arm, size - arm, height, center=(-(size - arm) / 2, arm / 2))
    verts = np.vstack([a.vertices, b.vertices])
    tris = np.vstack([a.triangles, b.triangles + len(a.vertices)])
    return TriangleMesh(verts, tris)


def heightmap_solid(
    bottom_fn, size=40.0, top: float = 40.0, resolution: int = 41
) -> TriangleMesh:
    """Closed solid over a square footprint whose bottom surface is
    z = bottom_fn(x, y) (must stay below `top`)."""
    xs = np.linspace(-size / 2, size / 2, resolution)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    gz = np.asarray(bottom_fn(gx, gy), dtype=np.float64)
    n = resolution
    verts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1).tolist()
    tris = []
    idx = lambda i, j: i * n + j
    for i in range(n - 1):
        for j in range(n - 1):
            tris.append([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)])
            tris.append([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)])
    # flat top and four side walls
    base = len(verts)
    top_corners = [
        [-size / 2, -size / 2, top],
        [size / 2, -size / 2, top],
        [size / 2, size / 2, top],
        [-size / 2, size / 2, top],
    ]
    verts += top_corners
    tris += _quad(base, base + 3, base + 2, base + 1)
    for edge, (ca, cb) in (
        ([idx(i, 0) for i in range(n)], (base, base + 1)),
        ([idx(n - 1, j) for j in range(n)], (base + 1, base + 2)),
        ([idx(i, n - 1) for i in range(n - 1, -1, -1)], (base + 2, base + 3)),
        ([idx(0, j) for j in range(n - 1, -1, -1)], (base + 3, base)),
    ):
        for a, b in zip(edge, edge[1:]):
            tris.append([a, b, ca])
        tris.append([edge[-1], cb, ca])
    return TriangleMesh(verts, tris)


def cap_block_mesh(size=56.0, bump_height=16.0, bump_radius=26.0) -> TriangleMesh:
    """Block with a spherical-cap bump protruding from the contact face."""
    rs = (bump_radius**2 + bump_height**2) / (2 * bump_height)

    def bottom(x, y):
        r2 = x * x + y * y
        inside = r2 < bump_radius**2
        dome = rs - np.sqrt(np.maximum(rs * rs - r2, 0.0))
        return np.where(inside, dome, bump_height)

    return heightmap_solid(bottom, size=size, top=size)


def wavy_cube_mesh(size=40.0, amplitude=2.0, period=4.4) -> TriangleMesh:
    """Cube with a sinusoidal relief (peak-to-trough `amplitude`) on the
    contact face; ridge lines run along y."""

    def bottom(x, y):
        return 0.5 * amplitude * (1.0 + np.sin(2.0 * math.pi * x / period))

    return heightmap_solid(bottom, size=size, top=size, resolution=81)


def chamfer_cube_mesh(size=40.0, chamfer=20.0) -> TriangleMesh:
    """Cube with the contact-face corners cut by `chamfer` mm (convex hull)."""
    s = size / 2
    pts = [[x, y, size] for x in (-s, s) for y in (-s, s)]
    for sx in (-1, 1):
        for sy in (-1, 1):
            cx, cy = sx * s, sy * s
            pts.append([cx - sx * chamfer, cy, 0.0])
            pts.append([cx, cy - sy * chamfer, 0.0])
            pts.append([cx, cy, chamfer])
    hull = ConvexHull(np.asarray(pts))
    return TriangleMesh(hull.points, hull.simplices)


def cube_mesh(size=40.0) -> TriangleMesh:
    return box_mesh(size, size, size)


def sphere_mesh(radius=15.0, rings=24, segments=48) -> TriangleMesh:
    """Sphere resting with its lowest point at z = 0."""
    verts = [[0.0, 0.0, 0.0]]
    for i in range(1, rings):
        theta = math.pi * i / rings
        z = radius * (1 - math.cos(theta))
        r = radius * math.sin(theta)
        for k in range(segments):
            a = 2 * math.pi * k / segments
            verts.append([r * math.cos(a), r * math.sin(a), z])
    verts.append([0.0, 0.0, 2 * radius])
    tris = []
    for k in range(segments):
        tris.append([0, 1 + k, 1 + (k + 1) % segments])
    for i in range(rings - 2):
        r0 = 1 + i * segments
        r1 = r0 + segments
        for k in range(segments):
            k1 = (k + 1) % segments
            tris += _quad(r0 + k, r1 + k, r1 + k1, r0 + k1)
    top = len(verts) - 1
    r0 = 1 + (rings - 2) * segments
    for k in range(segments):
        tris.append([top, r0 + (k + 1) % segments, r0 + k])
    return TriangleMesh(verts, tris)


def two_sphere_mesh(gap: float, radius: float = 15.0) -> TriangleMesh:
    """Rigid dumbbell of two spheres whose facing surfaces are `gap` mm apart,
    lowest points at z = 0; the tension-bridging probe object."""
    if gap < 0:
        raise ValueError("gap must be non-negative")
    s = sphere_mesh(radius)
    half = radius + gap / 2.0
    va = s.vertices + np.array([-half, 0.0, 0.0])
    vb = s.vertices + np.array([half, 0.0, 0.0])
    tris = np.vstack([s.triangles, s.triangles + len(s.vertices)])
    return TriangleMesh(np.vstack([va, vb]), tris)


def surface_cloud(mesh: TriangleMesh, n: int = 2000, seed: int = 0) -> PointCloud:
    """Area-weighted uniform surface samples, used as the ICP model cloud."""
    rng = np.random.default_rng(seed)
    v = mesh.vertices
    t = mesh.triangles
    e1 = v[t[:, 1]] - v[t[:, 0]]
    e2 = v[t[:, 2]] - v[t[:, 0]]
    areas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
    pick = rng.choice(len(t), size=n, p=areas / areas.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    a = 1.0 - r1
    b = r1 * (1.0 - r2)
    c = r1 * r2
    pts = (
        a[:, None] * v[t[pick, 0]]
        + b[:, None] * v[t[pick, 1]]
        + c[:, None] * v[t[pick, 2]]
    )
    return PointCloud(pts, frame="Object")


@dataclass(frozen=True)
class ObjectLibrary:
    """Named meshes with class labels; `no_touch` is always class 0."""

    name: str
    meshes: dict  # label -> TriangleMesh

    @property
    def classes(self) -> list[str]:
        return [NO_TOUCH] + sorted(self.meshes)

    def class_index(self, label: str) -> int:
        return self.classes.index(label)


def six_object_library() -> ObjectLibrary:
    return ObjectLibrary(
        "six_object",
        {
            "cube": cube_mesh(),
            "frustum": frustum_mesh(),
            "prism": prism_mesh(),
            "cylinder": cylinder_mesh(),
            "l_block": l_block_mesh(),
            "cap_block": cap_block_mesh(),
        },
    )


def three_cube_library() -> ObjectLibrary:
    return ObjectLibrary(
        "three_cube",
        {
            "standard": cube_mesh(),
            "wavy": wavy_cube_mesh(),
            "chamfer": chamfer_cube_mesh(),
        },
    )
