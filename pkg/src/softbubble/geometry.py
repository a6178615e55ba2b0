"""Rigid transforms, frame graph, meshes, point clouds and the pinhole camera."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class GeometryError(ValueError):
    pass


def _quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise GeometryError("zero-norm quaternion")
    q = q / n
    # canonical sign: w >= 0
    if q[0] < 0:
        q = -q
    return q


def _quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (unit quaternion, w-first) plus translation in mm."""

    quat: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "quat", _quat_normalize(self.quat))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise GeometryError("non-finite translation")
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_axis_angle(axis, angle_rad: float, translation=(0.0, 0.0, 0.0)):
        axis = np.asarray(axis, dtype=np.float64)
        n = np.linalg.norm(axis)
        if n < 1e-12:
            raise GeometryError("zero rotation axis")
        axis = axis / n
        half = 0.5 * angle_rad
        q = np.concatenate([[math.cos(half)], math.sin(half) * axis])
        return RigidTransform(q, np.asarray(translation, dtype=np.float64))

    @staticmethod
    def from_matrix(rot: np.ndarray, translation=(0.0, 0.0, 0.0)):
        m = np.asarray(rot, dtype=np.float64)
        t = np.trace(m)
        if t > 0:
            s = math.sqrt(t + 1.0) * 2
            q = np.array(
                [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
            )
        else:
            i = int(np.argmax(np.diag(m)))
            j, k = (i + 1) % 3, (i + 2) % 3
            s = math.sqrt(max(1.0 + m[i, i] - m[j, j] - m[k, k], 0.0)) * 2
            q = np.empty(4)
            q[0] = (m[k, j] - m[j, k]) / s
            q[1 + i] = 0.25 * s
            q[1 + j] = (m[j, i] + m[i, j]) / s
            q[1 + k] = (m[k, i] + m[i, k]) / s
        return RigidTransform(q, np.asarray(translation, dtype=np.float64))

    @property
    def matrix(self) -> np.ndarray:
        return _quat_to_matrix(self.quat)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + self.translation

    def rotation_angle(self) -> float:
        """Rotation magnitude in radians."""
        return 2.0 * math.acos(min(1.0, abs(self.quat[0])))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform applying b first, then a."""
    return RigidTransform(_quat_mul(a.quat, b.quat), a.apply(b.translation[None, :])[0])


def invert(t: RigidTransform) -> RigidTransform:
    q_inv = t.quat * np.array([1.0, -1.0, -1.0, -1.0])
    r_inv = _quat_to_matrix(q_inv)
    return RigidTransform(q_inv, -(r_inv @ t.translation))


class FrameGraph:
    """Named coordinate frames connected by rigid transforms (a tree)."""

    def __init__(self):
        self._edges: dict[str, dict[str, RigidTransform]] = {}

    def add_frame(self, name: str):
        self._edges.setdefault(name, {})

    def add_edge(self, parent: str, child: str, child_in_parent: RigidTransform):
        self.add_frame(parent)
        self.add_frame(child)
        self._edges[parent][child] = child_in_parent
        self._edges[child][parent] = invert(child_in_parent)

    def resolve(self, frm: str, to: str) -> RigidTransform:
        """Transform taking points expressed in `to` into `frm` coordinates."""
        if frm not in self._edges or to not in self._edges:
            raise GeometryError(f"unknown frame in resolve({frm!r}, {to!r})")
        if frm == to:
            return RigidTransform.identity()
        # BFS; the graph is a tree so the path is unique
        prev: dict[str, str] = {frm: frm}
        queue = [frm]
        while queue:
            cur = queue.pop(0)
            if cur == to:
                break
            for nxt in self._edges[cur]:
                if nxt not in prev:
                    prev[nxt] = cur
                    queue.append(nxt)
        if to not in prev:
            raise GeometryError(f"frames {frm!r} and {to!r} are not connected")
        path = [to]
        while path[-1] != frm:
            path.append(prev[path[-1]])
        path.reverse()
        t = RigidTransform.identity()
        for a, b in zip(path, path[1:]):
            t = compose(t, self._edges[a][b])
        return t


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, 3) mm
    frame: str = "World"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if pts.size and not np.all(np.isfinite(pts)):
            raise GeometryError("non-finite point coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def transformed(self, t: RigidTransform, frame: str | None = None) -> "PointCloud":
        return PointCloud(t.apply(self.points), frame or self.frame)


class TriangleMesh:
    """Indexed triangle mesh, coordinates in mm."""

    def __init__(self, vertices, triangles):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if tris.size and (tris.min() < 0 or tris.max() >= len(self.vertices)):
            raise GeometryError("triangle index out of range")
        areas = self._areas(self.vertices, tris)
        degenerate = areas < 1e-9
        if degenerate.any():
            logger.warning("dropping %d degenerate triangles", int(degenerate.sum()))
            tris = tris[~degenerate]
        self.triangles = tris

    @staticmethod
    def _areas(v, t):
        if t.size == 0:
            return np.zeros(0)
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)

    def transformed(self, t: RigidTransform) -> "TriangleMesh":
        return TriangleMesh(t.apply(self.vertices), self.triangles)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def ray_cast(origin, direction, mesh: TriangleMesh):
    """Nearest positive hit distance of a ray against a mesh, or None.

    Moller-Trumbore over all triangles, vectorized.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise GeometryError("ray direction must be unit length")
    t = mesh.triangles
    if t.size == 0:
        return None
    v0 = mesh.vertices[t[:, 0]]
    e1 = mesh.vertices[t[:, 1]] - v0
    e2 = mesh.vertices[t[:, 2]] - v0
    pvec = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-12
    inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = o - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = np.einsum("j,ij->i", d, qvec) * inv_det
    dist = np.einsum("ij,ij->i", e2, qvec) * inv_det
    hit = ok & (u >= -1e-9) & (v >= -1e-9) & (u + v <= 1 + 1e-9) & (dist > 1e-9)
    if not hit.any():
        return None
    return float(dist[hit].min())


@dataclass(frozen=True)
class PinholeCamera:
    width: int = 224
    height: int = 171
    hfov_deg: float = 62.0
    vfov_deg: float = 45.0
    min_range: float = 100.0  # mm
    max_range: float = 4000.0  # mm

    def __post_init__(self):
        if self.min_range >= self.max_range:
            raise GeometryError("min_range must be below max_range")

    @property
    def fx(self) -> float:
        return (self.width / 2) / math.tan(math.radians(self.hfov_deg) / 2)

    @property
    def fy(self) -> float:
        return (self.height / 2) / math.tan(math.radians(self.vfov_deg) / 2)

    @property
    def cx(self) -> float:
        return self.width / 2

    @property
    def cy(self) -> float:
        return self.height / 2

    def pixel_rays(self):
        """Per-pixel ray slopes (a, b) such that a point at depth d lies at
        (a*d, b*d, d) in the camera frame. Pixel centers at (u+0.5, v+0.5)."""
        u = np.arange(self.width) + 0.5
        v = np.arange(self.height) + 0.5
        a = (u - self.cx) / self.fx
        b = (v - self.cy) / self.fy
        return np.meshgrid(a, b, indexing="xy")

    def fov_footprint_area(self, distance_mm: float) -> float:
        """Area (mm^2) of the rectangular FOV footprint on a frontal plane."""
        w = 2 * distance_mm * math.tan(math.radians(self.hfov_deg) / 2)
        h = 2 * distance_mm * math.tan(math.radians(self.vfov_deg) / 2)
        return w * h


@dataclass
class DepthImage:
    """Per-pixel depth in mm as float64; 0 marks invalid pixels."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise GeometryError("depth image must be 2-D")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.data > 0


def deproject(img: DepthImage, cam: PinholeCamera) -> PointCloud:
    """Back-project valid pixels into the camera frame."""
    if (img.height, img.width) != (cam.height, cam.width):
        raise GeometryError("depth image dimensions do not match camera")
    a, b = cam.pixel_rays()
    d = img.data
    m = img.valid
    pts = np.stack([a[m] * d[m], b[m] * d[m], d[m]], axis=1)
    return PointCloud(pts, frame="Camera")


def project(points: np.ndarray, cam: PinholeCamera):
    """Pinhole projection; returns (u, v, depth) arrays (continuous pixel coords)."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = p[:, 2]
    u = p[:, 0] / z * cam.fx + cam.cx
    v = p[:, 1] / z * cam.fy + cam.cy
    return u, v, z
