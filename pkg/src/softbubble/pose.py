"""ICP pose estimation from bubble contact patches: model cropping,
multi-orientation initialization, best-fit selection and a windowed tracker."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointCloud, RigidTransform, compose, invert
from .touch import ContactPatch


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 40
    max_correspondence_distance: float = 15.0  # mm
    rot_tolerance: float = 1e-4  # rad, per-iteration update
    trans_tolerance: float = 1e-3  # mm, per-iteration update
    inlier_threshold: float = 0.6  # min inlier fraction for acceptance

    def __post_init__(self):
        for name in (
            "max_iterations",
            "max_correspondence_distance",
            "rot_tolerance",
            "trans_tolerance",
            "inlier_threshold",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class PoseEstimate:
    pose: RigidTransform | None  # object in World, None on failure
    fitness: float = math.inf  # RMS inlier correspondence distance, mm
    inlier_fraction: float = 0.0
    init_index: int = -1

    @property
    def success(self) -> bool:
        return self.pose is not None


FAILED = PoseEstimate(None)


def crop_model(
    model: PointCloud, contact_normal, fraction: float
) -> PointCloud:
    """Drop the far `fraction` of the model's extent along `contact_normal`
    (the side facing away from the assumed contact face)."""
    if not 0.0 <= fraction <= 0.25:
        raise ValueError("crop fraction must lie in [0, 0.25]")
    if len(model) == 0:
        raise ValueError("empty model cloud")
    if fraction == 0.0:
        return model
    n = np.asarray(contact_normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    s = model.points @ n
    cut = s.min() + (1.0 - fraction) * (s.max() - s.min())
    return PointCloud(model.points[s <= cut], model.frame)


def best_fit_transform(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Closed-form least-squares rigid alignment (cross-covariance + SVD)."""
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    cov = (src - mu_s).T @ (dst - mu_d)
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform.from_matrix(rot, mu_d - rot @ mu_s)


def icp(
    source: PointCloud,
    target_model: PointCloud,
    init: RigidTransform,
    params: IcpParams = IcpParams(),
    source_tree: cKDTree | None = None,
    init_index: int = 0,
) -> PoseEstimate:
    """Point-to-point ICP registering the model into the sensed cloud.

    `init` is the initial object-in-World pose guess; the returned pose is the
    refined object-in-World pose. Correspondences are gated from the model
    side so membrane points without an object counterpart exert no pull.
    Fails when fewer than 3 correspondences fall within the distance gate.
    """
    if len(source) < 3 or len(target_model) < 3:
        return FAILED
    tree = source_tree if source_tree is not None else cKDTree(source.points)
    model = target_model.points
    pose = init  # maps model-frame points into World
    max_d = params.max_correspondence_distance
    fitness = math.inf
    inlier_fraction = 0.0
    for _ in range(params.max_iterations):
        moved = pose.apply(model)
        dist, idx = tree.query(moved, distance_upper_bound=max_d)
        inl = np.isfinite(dist)
        if inl.sum() < 3:
            return FAILED
        step = best_fit_transform(moved[inl], source.points[idx[inl]])
        pose = compose(step, pose)
        fitness = float(np.sqrt(np.mean(dist[inl] ** 2)))
        inlier_fraction = float(inl.mean())
        if (
            step.rotation_angle() < params.rot_tolerance
            and np.linalg.norm(step.translation) < params.trans_tolerance
        ):
            break
    return PoseEstimate(pose, fitness, inlier_fraction, init_index)


def estimate_pose(
    patch: ContactPatch | PointCloud,
    model: PointCloud,
    contact_normal,
    n_inits: int = 12,
    params: IcpParams = IcpParams(),
    crop_fraction: float = 0.25,
) -> PoseEstimate:
    """Best ICP result over `n_inits` initial yaws about the contact normal."""
    if not 1 <= n_inits <= 12:
        raise ValueError("n_inits must lie in 1..12")
    cloud = patch.cloud() if isinstance(patch, ContactPatch) else patch
    if len(cloud) == 0:
        return FAILED
    cropped = crop_model(model, contact_normal, crop_fraction)
    tree = cKDTree(cloud.points)
    axis = np.asarray(contact_normal, dtype=np.float64)
    patch_centroid = cloud.points.mean(axis=0)
    model_centroid = cropped.points.mean(axis=0)
    best = FAILED
    for k in range(n_inits):
        rot = RigidTransform.from_axis_angle(axis, 2.0 * math.pi * k / n_inits)
        init = RigidTransform(rot.quat, patch_centroid - rot.matrix @ model_centroid)
        est = icp(cloud, cropped, init, params, source_tree=tree, init_index=k)
        if not est.success or est.inlier_fraction < params.inlier_threshold:
            continue
        if est.fitness < best.fitness:
            best = est
    return best


@dataclass
class TrackerState:
    last: PoseEstimate | None = None
    window_rotation_deg: float = 20.0  # two fixed rotations about the contact face
    contact_normal: tuple = (0.0, 0.0, 1.0)


class PoseTracker:
    """Windowed tracker: per frame at most 3 initializations (two fixed
    rotations about the assumed contact face plus the last successful pose)."""

    def __init__(
        self,
        model: PointCloud,
        params: IcpParams = IcpParams(),
        state: TrackerState | None = None,
        crop_fraction: float = 0.25,
    ):
        self.params = params
        self.state = state or TrackerState()
        self.model = crop_model(model, self.state.contact_normal, crop_fraction)

    def initialize(self, patch, n_inits: int = 12) -> PoseEstimate:
        est = estimate_pose(
            patch, self.model, self.state.contact_normal, n_inits, self.params,
            crop_fraction=0.0,
        )
        if est.success:
            self.state.last = est
        return est

    def step(self, patch) -> PoseEstimate:
        cloud = patch.cloud() if isinstance(patch, ContactPatch) else patch
        if len(cloud) == 0 or self.state.last is None:
            return FAILED
        axis = np.asarray(self.state.contact_normal, dtype=np.float64)
        ang = math.radians(self.state.window_rotation_deg)
        last = self.state.last.pose
        inits = [last]
        for sgn in (1.0, -1.0):
            spin = RigidTransform.from_axis_angle(axis, sgn * ang)
            inits.append(RigidTransform(compose(spin, last).quat, last.translation))
        tree = cKDTree(cloud.points)
        best = FAILED
        for k, init in enumerate(inits):
            est = icp(cloud, self.model, init, self.params, tree, init_index=k)
            if not est.success or est.inlier_fraction < self.params.inlier_threshold:
                continue
            if est.fitness < best.fitness:
                best = est
        if best.success:
            self.state.last = best
        return best


def symmetry_group_z(order: int) -> list[RigidTransform]:
    """Discrete rotational symmetry about +z (e.g. order 4 for a square face)."""
    return [
        RigidTransform.from_axis_angle((0, 0, 1), 2.0 * math.pi * k / order)
        for k in range(order)
    ]


def pose_errors(
    estimate: RigidTransform,
    truth: RigidTransform,
    symmetry: list[RigidTransform] | None = None,
):
    """(translation error mm, rotation error rad), minimized over the object's
    symmetry group so equivalent poses score as exact."""
    group = symmetry or [RigidTransform.identity()]
    best = (math.inf, math.inf)
    for s in group:
        t_sym = compose(truth, s)
        delta = compose(invert(t_sym), estimate)
        err = (float(np.linalg.norm(delta.translation)), delta.rotation_angle())
        if err[1] < best[1]:
            best = err
    return best
