"""File formats: ASCII OBJ/STL meshes, ASCII PLY clouds, 16-bit PGM depth."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import DepthImage, GeometryError, PointCloud, TriangleMesh

DEPTH_SCALE = 0.1  # mm per PGM count
PGM_MAXVAL = 65535


def load_obj(path) -> TriangleMesh:
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                tris.append([idx[0], idx[k], idx[k + 1]])
    if not verts:
        raise GeometryError(f"no vertices in OBJ file {path}")
    return TriangleMesh(verts, tris)


def load_stl(path) -> TriangleMesh:
    text = Path(path).read_text()
    if not text.lstrip().startswith("solid"):
        raise GeometryError(f"{path}: only ASCII STL is supported")
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    cur: list[int] = []
    index: dict[tuple, int] = {}
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "vertex":
            key = tuple(round(float(x), 9) for x in parts[1:4])
            if key not in index:
                index[key] = len(verts)
                verts.append([float(x) for x in parts[1:4]])
            cur.append(index[key])
        elif parts[0] == "endfacet":
            if len(cur) == 3:
                tris.append(cur)
            cur = []
    if not tris:
        raise GeometryError(f"no facets in STL file {path}")
    return TriangleMesh(verts, tris)


def load_mesh(path) -> TriangleMesh:
    p = Path(path)
    if p.suffix.lower() == ".obj":
        return load_obj(p)
    if p.suffix.lower() == ".stl":
        return load_stl(p)
    raise GeometryError(f"unsupported mesh format: {p.suffix}")


def write_ply(cloud: PointCloud, path, labels=None):
    pts = cloud.points
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pts)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        lines.append("property int label")
    lines.append("end_header")
    body = []
    for i, p in enumerate(pts):
        row = f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f}"
        if labels is not None:
            row += f" {labels[i]}"
        body.append(row)
    Path(path).write_text("\n".join(lines + body) + "\n")


def read_ply(path) -> PointCloud:
    lines = Path(path).read_text().splitlines()
    n = 0
    header_end = 0
    for i, line in enumerate(lines):
        if line.startswith("element vertex"):
            n = int(line.split()[-1])
        if line.strip() == "end_header":
            header_end = i + 1
            break
    pts = [[float(x) for x in lines[header_end + k].split()[:3]] for k in range(n)]
    return PointCloud(np.array(pts).reshape(-1, 3))


def write_pgm16(img: DepthImage, path):
    """Binary PGM (P5), 16-bit big-endian, 0.1 mm per count, 0 = invalid."""
    counts = np.round(img.data / DEPTH_SCALE).astype(np.int64)
    if (counts > PGM_MAXVAL).any():
        raise GeometryError("depth exceeds 16-bit PGM range")
    header = f"P5\n{img.width} {img.height}\n{PGM_MAXVAL}\n".encode("ascii")
    payload = counts.astype(">u2").tobytes()
    Path(path).write_bytes(header + payload)


def read_pgm16(path) -> DepthImage:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise GeometryError(f"{path}: not a binary PGM file")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(f) for f in fields)
    if maxval != PGM_MAXVAL:
        raise GeometryError(f"{path}: expected 16-bit PGM, maxval={maxval}")
    n = width * height
    counts = np.frombuffer(raw, dtype=">u2", count=n, offset=pos)
    return DepthImage(counts.reshape(height, width).astype(np.float64) * DEPTH_SCALE)


def write_heightfield_csv(hf, path):
    """Grid dump: x_mm, y_mm, z_mm, contact flag (interior nodes only)."""
    rows = ["x_mm,y_mm,z_mm,contact"]
    xs = hf.grid.xs
    contact = hf.contact if hf.contact is not None else np.zeros_like(hf.z, dtype=bool)
    ii, jj = np.nonzero(hf.grid.interior)
    for i, j in zip(ii, jj):
        rows.append(f"{xs[i]:.3f},{xs[j]:.3f},{hf.z[i, j]:.6f},{int(contact[i, j])}")
    Path(path).write_text("\n".join(rows) + "\n")
