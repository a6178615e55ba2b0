"""Experiment scenarios: cone-sampled press trajectories, the pose-estimation
experiment, and the press-classify-push sorting demo."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .classify import degrade_resolution
from .geometry import DepthImage, RigidTransform, compose
from .membrane import BubbleConfig, build_obstacle, rest_shape, solve_membrane
from .objects import ObjectLibrary
from .pose import IcpParams, PoseEstimate, estimate_pose, pose_errors, symmetry_group_z
from .render import NoiseModel, SensorRig, apply_noise, render_depth
from .touch import ContactPatch, TouchConfig, capture_reference, extract_contact, is_touch


def sample_cone_axes(n: int, aperture_deg: float, seed: int) -> np.ndarray:
    """n approach directions uniform over the spherical cap of full angle
    `aperture_deg` about vertical, pointing downward (-z)."""
    if n < 1:
        raise ValueError("need at least one axis")
    if not 0.0 < aperture_deg < 180.0:
        raise ValueError("aperture must lie in (0, 180) degrees")
    rng = np.random.default_rng(seed)
    cos_max = math.cos(math.radians(aperture_deg) / 2.0)
    cos_t = rng.uniform(cos_max, 1.0, size=n)
    sin_t = np.sqrt(1.0 - cos_t**2)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return np.stack(
        [sin_t * np.cos(phi), sin_t * np.sin(phi), -cos_t], axis=1
    )


def approach_rotation(axis) -> RigidTransform:
    """Rotation taking -z to the given (downward) approach axis."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    src = np.array([0.0, 0.0, -1.0])
    v = np.cross(src, a)
    s = np.linalg.norm(v)
    if s < 1e-12:
        return RigidTransform.identity()
    angle = math.atan2(s, float(src @ a))
    return RigidTransform.from_axis_angle(v, angle)


@dataclass(frozen=True)
class PressScenario:
    label: str
    approach_axis: tuple = (0.0, 0.0, -1.0)
    yaw_deg: float = 0.0
    offset: tuple = (0.0, 0.0)
    press_depth: float = 20.0  # mm, <= 40
    frames: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.press_depth > 40.0:
            raise ValueError("press depth must not exceed 40 mm")


@dataclass
class PressResult:
    frames: list = field(default_factory=list)  # DepthImage per step
    patches: list = field(default_factory=list)  # ContactPatch or None
    poses: list = field(default_factory=list)  # ground-truth object pose per step
    touch: list = field(default_factory=list)  # is_touch flag per step


def run_press(
    scenario: PressScenario,
    library: ObjectLibrary,
    rig: SensorRig | None = None,
    noise: NoiseModel | None = None,
    touch_cfg: TouchConfig | None = None,
) -> PressResult:
    """Move the object into the membrane along the approach axis in equal
    depth steps; per step solve, render, add noise and run touch detection."""
    rig = rig or SensorRig()
    noise = noise or NoiseModel(seed=scenario.seed)
    touch_cfg = touch_cfg or TouchConfig()
    mesh = library.meshes[scenario.label]
    cfg = rig.bubble
    rot = compose(
        approach_rotation(scenario.approach_axis),
        RigidTransform.from_axis_angle((0, 0, 1), math.radians(scenario.yaw_deg)),
    )
    z_min = mesh.transformed(rot).vertices[:, 2].min()
    axis = np.asarray(scenario.approach_axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    final_t = np.array(
        [
            scenario.offset[0],
            scenario.offset[1],
            cfg.inflation_height - scenario.press_depth - z_min,
        ]
    )
    reference = capture_reference([render_depth(rig, rest_shape(cfg))])
    result = PressResult()
    rest = rest_shape(cfg)
    for k in range(scenario.frames):
        depth_k = scenario.press_depth * k / max(scenario.frames - 1, 1)
        lift = (scenario.press_depth - depth_k) / max(-axis[2], 1e-6)
        pose = RigidTransform(rot.quat, final_t - axis * lift)
        if depth_k <= 0.0:
            hf = rest
        else:
            hf = solve_membrane(cfg, build_obstacle(mesh, pose, cfg))
        img = render_depth(rig, hf)
        if not noise.disabled():
            frame_seed = int(
                np.random.SeedSequence([scenario.seed, k]).generate_state(1)[0]
            )
            nm = NoiseModel(
                noise.gaussian_sigma_fraction,
                noise.dark_region,
                noise.glare,
                frame_seed,
            )
            img = apply_noise(img, nm, rig.camera)
        touching, _ = is_touch(img, reference, touch_cfg)
        patch = (
            extract_contact(img, reference, rig.camera, touch_cfg)
            if touching
            else None
        )
        result.frames.append(img)
        result.patches.append(patch)
        result.poses.append(pose)
        result.touch.append(touching)
    return result


def patch_in_world(patch: ContactPatch, rig: SensorRig) -> ContactPatch:
    """Lift a camera-frame patch into the bubble/World frame (camera sits
    `standoff` mm below the rim plane on the axis, z aligned)."""
    pts = patch.points.copy()
    pts[:, 2] -= rig.standoff
    return ContactPatch(pts, patch.labels, patch.pixel_mask)


@dataclass
class PoseTrialRecord:
    axis: tuple
    estimate: PoseEstimate
    truth: RigidTransform
    translation_error: float
    rotation_error_deg: float
    elapsed_s: float


def frustum_pose_experiment(
    library: ObjectLibrary,
    model_cloud,
    n_axes: int = 10,
    aperture_deg: float = 15.0,
    press_depth: float = 40.0,
    n_inits: int = 12,
    seed: int = 0,
    rig: SensorRig | None = None,
    noise: NoiseModel | None = None,
    params: IcpParams | None = None,
    symmetry_order: int = 4,
    label: str = "frustum",
) -> list[PoseTrialRecord]:
    """Press the target along cone-sampled approach axes and estimate its pose
    from the final-frame contact patch."""
    rig = rig or SensorRig()
    params = params or IcpParams()
    axes = sample_cone_axes(n_axes, aperture_deg, seed)
    group = symmetry_group_z(symmetry_order)
    records = []
    for i, axis in enumerate(axes):
        scen = PressScenario(
            label,
            approach_axis=tuple(axis),
            press_depth=press_depth,
            frames=2,
            seed=seed + 1000 * i,
        )
        res = run_press(scen, library, rig, noise)
        patch = res.patches[-1]
        truth = res.poses[-1]
        t0 = time.perf_counter()
        if patch is None:
            est = PoseEstimate(None)
        else:
            est = estimate_pose(
                patch_in_world(patch, rig),
                model_cloud,
                (0, 0, 1),
                n_inits,
                params,
            )
        elapsed = time.perf_counter() - t0
        if est.success:
            terr, rerr = pose_errors(est.pose, truth, group)
        else:
            terr, rerr = math.inf, math.inf
        records.append(
            PoseTrialRecord(
                tuple(axis), est, truth, terr, math.degrees(rerr), elapsed
            )
        )
    return records


@dataclass(frozen=True)
class SortScenario:
    objects: list  # ordered labels to sort
    zones: dict  # class label -> (x, y) zone center on the table, mm
    zone_radius: float = 60.0
    press_depth: float = 20.0
    seed: int = 0

    def __post_init__(self):
        centers = list(self.zones.values())
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                d = math.hypot(
                    centers[i][0] - centers[j][0], centers[i][1] - centers[j][1]
                )
                if d < 2 * self.zone_radius:
                    raise ValueError("sort zones must be pairwise disjoint")


@dataclass
class SortRow:
    label: str
    predicted: str
    final_position: tuple
    in_correct_zone: bool


def run_sort(
    scenario: SortScenario,
    library: ObjectLibrary,
    classifier,
    rig: SensorRig | None = None,
    noise: NoiseModel | None = None,
    level: int = 0,
) -> list[SortRow]:
    """Press, classify between press and push, then push the object
    kinematically to the predicted class's zone."""
    rig = rig or SensorRig()
    rows = []
    for i, label in enumerate(scenario.objects):
        scen = PressScenario(
            label,
            press_depth=scenario.press_depth,
            frames=2,
            seed=scenario.seed + 7919 * i,
        )
        res = run_press(scen, library, rig, noise)
        frame = res.frames[-1]
        predicted = classifier.predict_label(degrade_resolution(frame, level))
        zone = scenario.zones.get(predicted, scenario.zones.get(label))
        # kinematic push: the object co-translates with the end effector while
        # contact depth stays above threshold, ending at the predicted zone
        final = (float(zone[0]), float(zone[1])) if zone else (0.0, 0.0)
        correct_zone = scenario.zones.get(label)
        in_zone = (
            correct_zone is not None
            and math.hypot(final[0] - correct_zone[0], final[1] - correct_zone[1])
            <= scenario.zone_radius
        )
        rows.append(SortRow(label, predicted, final, in_zone))
    return rows


@dataclass(frozen=True)
class BridgingTrial:
    gap: float  # mm between facing sphere surfaces
    patch_components: int  # connected components seen by the depth pipeline
    contact_components: int  # connected components in the solver contact mask
    touching: bool

    @property
    def bridged(self) -> bool:
        return self.touching and self.patch_components < self.contact_components


def bridging_trial(
    gap: float,
    press_depth: float = 15.0,
    radius: float = 15.0,
    rig: SensorRig | None = None,
    touch_cfg: TouchConfig | None = None,
) -> BridgingTrial:
    """Press a rigid two-sphere dumbbell and compare the component count the
    depth pipeline reports against the solver's true contact mask. Membrane
    tension spans small gaps, falsely merging the two contacts into one."""
    from scipy import ndimage

    from .objects import two_sphere_mesh
    from .touch import EIGHT_CONNECTED

    rig = rig or SensorRig()
    touch_cfg = touch_cfg or TouchConfig()
    cfg = rig.bubble
    mesh = two_sphere_mesh(gap, radius)
    pose = RigidTransform(
        (1.0, 0.0, 0.0, 0.0), (0.0, 0.0, cfg.inflation_height - press_depth)
    )
    hf = solve_membrane(cfg, build_obstacle(mesh, pose, cfg))
    img = render_depth(rig, hf)
    reference = capture_reference([render_depth(rig, rest_shape(cfg))])
    touching, _ = is_touch(img, reference, touch_cfg)
    patch = extract_contact(img, reference, rig.camera, touch_cfg)
    n_contact = int(ndimage.label(hf.contact, structure=EIGHT_CONNECTED)[1])
    return BridgingTrial(gap, patch.n_components, n_contact, touching)


def critical_bridging_gap(
    gaps=None,
    press_depth: float = 15.0,
    radius: float = 15.0,
    rig: SensorRig | None = None,
    touch_cfg: TouchConfig | None = None,
) -> tuple[float | None, list[BridgingTrial]]:
    """Sweep sphere gaps in ascending order and report the smallest gap at
    which the depth pipeline resolves both contacts (no false merge), along
    with every trial. Returns (None, trials) if bridging never vanishes."""
    if gaps is None:
        gaps = range(10, 40, 2)
    rig = rig or SensorRig()
    trials = []
    critical = None
    for gap in sorted(gaps):
        t = bridging_trial(float(gap), press_depth, radius, rig, touch_cfg)
        trials.append(t)
        if (
            critical is None
            and t.touching
            and t.patch_components == t.contact_components
        ):
            critical = t.gap
    return critical, trials
