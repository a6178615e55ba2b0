"""Touch discrimination against a no-contact reference and naive contact
extraction from depth frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import DepthImage, GeometryError, PinholeCamera, PointCloud

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class TouchConfig:
    deviation_threshold: float = 6.0  # mm toward the camera
    min_pixels: int = 50
    median_filter: bool = True

    def __post_init__(self):
        if self.deviation_threshold <= 0:
            raise ValueError("deviation threshold must be positive")
        if self.min_pixels < 1:
            raise ValueError("min_pixels must be at least 1")


@dataclass(frozen=True)
class ReferenceFrame:
    depth: np.ndarray  # per-pixel mean rest depth, mm
    valid: np.ndarray  # pixels observed in at least one reference frame


def capture_reference(frames: list[DepthImage]) -> ReferenceFrame:
    if not frames:
        raise ValueError("need at least one no-touch frame")
    shape = frames[0].data.shape
    total = np.zeros(shape)
    count = np.zeros(shape)
    for f in frames:
        if f.data.shape != shape:
            raise GeometryError("reference frames have mismatched dimensions")
        m = f.valid
        total[m] += f.data[m]
        count[m] += 1
    valid = count > 0
    depth = np.where(valid, total / np.maximum(count, 1), 0.0)
    return ReferenceFrame(depth, valid)


def _filtered_depth(frame: DepthImage, ref: ReferenceFrame, cfg: TouchConfig):
    if frame.data.shape != ref.depth.shape:
        raise GeometryError("frame dimensions do not match reference")
    data = frame.data
    if cfg.median_filter:
        # neutralize invalid pixels before filtering so dropouts do not bleed
        filled = np.where(frame.valid, data, ref.depth)
        data = ndimage.median_filter(filled, size=3)
    return data


def _deviation_mask(frame: DepthImage, ref: ReferenceFrame, cfg: TouchConfig):
    data = _filtered_depth(frame, ref, cfg)
    valid = frame.valid & ref.valid
    deviation = ref.depth - data  # contact always compresses toward the camera
    return valid & (deviation > cfg.deviation_threshold)


def is_touch(frame: DepthImage, ref: ReferenceFrame, cfg: TouchConfig):
    """Returns (touching, deviating_pixel_count)."""
    mask = _deviation_mask(frame, ref, cfg)
    count = int(mask.sum())
    return count >= cfg.min_pixels, count


@dataclass(frozen=True)
class ContactPatch:
    points: np.ndarray  # (n, 3) camera frame, mm
    labels: np.ndarray  # (n,) connected-component label per point, from 1
    pixel_mask: np.ndarray

    @property
    def n_components(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def cloud(self) -> PointCloud:
        return PointCloud(self.points, frame="Camera")


def extract_contact(
    frame: DepthImage, ref: ReferenceFrame, cam: PinholeCamera, cfg: TouchConfig
) -> ContactPatch:
    """Deproject deviating pixels and label 8-connected components.

    Called on a no-touch frame this returns an empty patch.
    """
    mask = _deviation_mask(frame, ref, cfg)
    touching, _ = is_touch(frame, ref, cfg)
    if not touching:
        empty = np.zeros((0, 3))
        return ContactPatch(empty, np.zeros(0, dtype=np.int64), np.zeros_like(mask))
    labeled, _ = ndimage.label(mask, structure=EIGHT_CONNECTED)
    a, b = cam.pixel_rays()
    # deproject the same filtered depth the mask was computed from
    d = _filtered_depth(frame, ref, cfg)
    pts = np.stack([a[mask] * d[mask], b[mask] * d[mask], d[mask]], axis=1)
    return ContactPatch(pts, labeled[mask].astype(np.int64), mask)
