"""Tactile dataset generation, the 2^-N resolution-degradation pipeline, a
pluggable classifier interface with a nearest-centroid baseline, and accuracy
evaluation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import io as sbio
from .geometry import DepthImage, RigidTransform, compose
from .membrane import BubbleConfig, build_obstacle, rest_shape, solve_membrane
from .objects import NO_TOUCH, ObjectLibrary
from .render import NoiseModel, SensorRig, apply_noise, render_depth
from .touch import ReferenceFrame, TouchConfig, capture_reference, is_touch

TARGET_SIZE = 224  # classifier input is 224 x 224
MAX_LEVEL = 5


class DatasetError(RuntimeError):
    pass


def degrade_resolution(img: DepthImage, level: int) -> DepthImage:
    """Scale width and height by 2^-level (box averaging over valid pixels),
    then resize to 224 x 224 with bilinear interpolation."""
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError("resolution level must lie in 0..5")
    h, w = img.data.shape
    small_w = int(math.floor(w * 2.0**-level))
    small_h = int(math.floor(h * 2.0**-level))
    small = _box_downscale(img.data, img.valid, small_h, small_w)
    return DepthImage(_bilinear_resize(small, TARGET_SIZE, TARGET_SIZE))


def _box_downscale(data, valid, out_h, out_w):
    h, w = data.shape
    bin_r = np.floor(np.arange(h) * out_h / h).astype(np.int64)
    bin_c = np.floor(np.arange(w) * out_w / w).astype(np.int64)
    flat_bin = (bin_r[:, None] * out_w + bin_c[None, :]).ravel()
    vals = np.where(valid, data, 0.0).ravel()
    cnt = valid.ravel().astype(np.float64)
    sums = np.bincount(flat_bin, weights=vals, minlength=out_h * out_w)
    counts = np.bincount(flat_bin, weights=cnt, minlength=out_h * out_w)
    out = np.where(counts > 0, sums / np.maximum(counts, 1.0), 0.0)
    return out.reshape(out_h, out_w)


def _bilinear_resize(data, out_h, out_w):
    h, w = data.shape
    rr = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    cc = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    grid = np.meshgrid(rr, cc, indexing="ij")
    return ndimage.map_coordinates(data, grid, order=1, mode="nearest")


@dataclass
class DatasetEntry:
    file: str
    label: str
    split: str
    params: dict


@dataclass
class DatasetManifest:
    library: str
    classes: list
    seed: int
    reference_file: str
    entries: list = field(default_factory=list)

    def save(self, path):
        payload = {
            "library": self.library,
            "classes": self.classes,
            "seed": self.seed,
            "reference_file": self.reference_file,
            "entries": [vars(e) for e in self.entries],
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @staticmethod
    def load(path) -> "DatasetManifest":
        payload = json.loads(Path(path).read_text())
        m = DatasetManifest(
            payload["library"],
            payload["classes"],
            payload["seed"],
            payload["reference_file"],
        )
        m.entries = [DatasetEntry(**e) for e in payload["entries"]]
        return m

    def split_entries(self, split):
        return [e for e in self.entries if e.split == split]


@dataclass(frozen=True)
class SampleParams:
    yaw_deg: float
    offset_x: float
    offset_y: float
    press_depth: float
    pressure: float
    noise_seed: int


def _draw_sample(rng, cfg: BubbleConfig) -> SampleParams:
    return SampleParams(
        yaw_deg=float(rng.uniform(0.0, 360.0)),
        offset_x=float(rng.uniform(-20.0, 20.0)),
        offset_y=float(rng.uniform(-20.0, 20.0)),
        press_depth=float(rng.uniform(10.0, 40.0)),
        pressure=float(cfg.pressure * rng.uniform(0.8, 1.2)),
        noise_seed=int(rng.integers(0, 2**32)),
    )


def press_pose(mesh, params: SampleParams, cfg: BubbleConfig) -> RigidTransform:
    """Pose placing the yawed, offset object with its lowest point pressed
    `press_depth` mm below the rest apex height."""
    yaw = RigidTransform.from_axis_angle((0, 0, 1), math.radians(params.yaw_deg))
    z_min = mesh.transformed(yaw).vertices[:, 2].min()
    target = cfg.inflation_height - params.press_depth
    shift = RigidTransform(
        translation=(params.offset_x, params.offset_y, target - z_min)
    )
    return compose(shift, yaw)


def simulate_press_frame(
    mesh, params: SampleParams, rig: SensorRig, noise: NoiseModel
) -> DepthImage:
    cfg = BubbleConfig(
        rig.bubble.rim_radius,
        rig.bubble.inflation_height,
        params.pressure,
        rig.bubble.grid_spacing,
    )
    obstacle = build_obstacle(mesh, press_pose(mesh, params, cfg), cfg)
    hf = solve_membrane(cfg, obstacle)
    img = render_depth(rig, hf)
    nm = NoiseModel(
        noise.gaussian_sigma_fraction, noise.dark_region, noise.glare, params.noise_seed
    )
    return apply_noise(img, nm, rig.camera)


def clean_reference(rig: SensorRig) -> ReferenceFrame:
    return capture_reference([render_depth(rig, rest_shape(rig.bubble))])


def generate_dataset(
    library: ObjectLibrary,
    per_class_train: int,
    per_class_val: int,
    seed: int,
    out_dir,
    rig: SensorRig | None = None,
    noise: NoiseModel | None = None,
    touch_cfg: TouchConfig | None = None,
    max_retries: int = 100,
) -> DatasetManifest:
    """Simulate, render and write one depth file per sample; touch samples
    that fail the touch filter are redrawn."""
    if per_class_train < 1 or per_class_val < 1:
        raise ValueError("per-class counts must be at least 1")
    rig = rig or SensorRig()
    noise = noise or NoiseModel()
    touch_cfg = touch_cfg or TouchConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reference = clean_reference(rig)
    ref_img = DepthImage(np.where(reference.valid, reference.depth, 0.0))
    ref_file = "reference.pgm"
    sbio.write_pgm16(ref_img, out / ref_file)
    manifest = DatasetManifest(library.name, library.classes, seed, ref_file)
    rest = rest_shape(rig.bubble)
    for ci, label in enumerate(library.classes):
        cls_dir = out / label
        cls_dir.mkdir(exist_ok=True)
        for split, count in (("train", per_class_train), ("val", per_class_val)):
            for k in range(count):
                ss = np.random.SeedSequence([seed, ci, 0 if split == "train" else 1, k])
                rng = np.random.default_rng(ss)
                if label == NO_TOUCH:
                    params = _draw_sample(rng, rig.bubble)
                    nm = NoiseModel(
                        noise.gaussian_sigma_fraction,
                        noise.dark_region,
                        noise.glare,
                        params.noise_seed,
                    )
                    img = apply_noise(render_depth(rig, rest), nm, rig.camera)
                else:
                    mesh = library.meshes[label]
                    for attempt in range(max_retries):
                        params = _draw_sample(rng, rig.bubble)
                        img = simulate_press_frame(mesh, params, rig, noise)
                        touching, _ = is_touch(img, reference, touch_cfg)
                        if touching:
                            break
                    else:
                        raise DatasetError(
                            f"{label}: no touching sample after {max_retries} retries"
                        )
                fname = f"{label}/{split}_{k:05d}.pgm"
                sbio.write_pgm16(img, out / fname)
                manifest.entries.append(
                    DatasetEntry(fname, label, split, vars(params))
                )
    manifest.save(out / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# Classifier interface, nearest-centroid baseline and the rotation-aligned
# prototype classifier


@dataclass(frozen=True)
class PrototypeParams:
    """Tunables for the prototype classifier's feature blocks.

    Feature blocks per image: two polar-resampled shape maps (half-height
    level slab and the full deformation map), a ring power spectrum of the
    high-passed contact plateau, and a max-deformation depth key used to gate
    prototype comparisons to similar press depths.
    """

    radial_bins: int = 28
    angular_bins: int = 64
    max_radius_px: float = 78.0
    ring_bins: int = 48
    ring_min_bin: int = 13  # ignore relief coarser than ~4.9 mm wavelength
    ring_max_freq: float = 0.75  # cycles/mm at the membrane
    pixel_mm: tuple = (0.469, 0.670)  # (row, col) pitch at the membrane, 224x224
    depth_bin_mm: float = 5.0
    weight_half: float = 1.0  # half-height shape block
    weight_full: float = 0.3  # full deformation shape block
    weight_ring: float = 0.3  # plateau ring spectrum block
    weight_spread: float = 0.3  # plateau depth-spread scalar, per mm


class PrototypeClassifier:
    """Nearest-prototype classifier over rotation-aligned polar features.

    Every training image is kept as a prototype. A query is compared against
    prototypes from similar press depths; shape blocks are resampled onto a
    polar grid about the deformation centroid so that the best relative
    rotation can be found in closed form via circular cross-correlation
    (computed with FFTs along the angle axis). The ring-spectrum block is
    rotation invariant by construction and keeps a fixed physical scale, so
    fine surface relief contributes only while the sensor actually resolves
    it.
    """

    def __init__(self, params: PrototypeParams = PrototypeParams()):
        self.params = params
        self.classes: list = []
        self.reference: np.ndarray | None = None
        self._half: np.ndarray | None = None  # complex, (n, radial, angular/2+1)
        self._full: np.ndarray | None = None
        self._rings: np.ndarray | None = None
        self._spreads: np.ndarray | None = None
        self._depth_bins: np.ndarray | None = None
        self._labels: np.ndarray | None = None
        self._polar = None
        self._ring_index = None

    # -- feature extraction ------------------------------------------------

    def _polar_grid(self):
        if self._polar is None:
            p = self.params
            rs = (np.arange(p.radial_bins) + 0.5) * p.max_radius_px / p.radial_bins
            ths = np.arange(p.angular_bins) * 2.0 * math.pi / p.angular_bins
            self._polar = np.meshgrid(rs, ths, indexing="ij")
        return self._polar

    def _polar_map(self, data, cy, cx):
        rr, tt = self._polar_grid()
        sampled = ndimage.map_coordinates(
            data,
            [cy + rr * np.sin(tt), cx + rr * np.cos(tt)],
            order=1,
            mode="constant",
            cval=0.0,
        )
        sampled *= np.sqrt(rr)  # annulus area weight keeps L2 distance faithful
        norm = np.linalg.norm(sampled)
        return sampled / norm if norm > 0 else sampled

    def _ring_spectrum(self, deform):
        p = self.params
        peak = deform.max()
        out = np.zeros(p.ring_bins)
        if peak <= 0:
            return out
        plateau = ndimage.binary_erosion(deform > 0.6 * peak, iterations=4)
        if plateau.sum() < 100:
            return out
        window = ndimage.gaussian_filter(plateau.astype(np.float64), 2.0)
        relief = (deform - ndimage.gaussian_filter(deform, 3.0)) * window
        power = np.abs(np.fft.rfft2(relief)) ** 2
        if self._ring_index is None:
            # physical frequency: the rendered image is anisotropic, so rings
            # in pixel frequency would smear one wavelength across bins
            fy = np.fft.fftfreq(relief.shape[0])[:, None] / p.pixel_mm[0]
            fx = np.fft.rfftfreq(relief.shape[1])[None, :] / p.pixel_mm[1]
            rad = np.sqrt(fy * fy + fx * fx)
            self._ring_index = np.minimum(
                (rad / p.ring_max_freq * p.ring_bins).astype(np.int64),
                p.ring_bins - 1,
            )
        binned = np.bincount(
            self._ring_index.ravel(), weights=power.ravel(), minlength=p.ring_bins
        )
        spectrum = np.sqrt(binned / plateau.sum())
        spectrum[: p.ring_min_bin] = 0.0
        return spectrum

    def _plateau_spread(self, deform):
        """Standard deviation of deformation inside the contact plateau (mm).

        Flat faces read near zero; faces with recessed corners or other
        coarse structure read their depth spread. Unlike the ring block this
        survives resolution degradation, so it separates coarse-structured
        classes at every level."""
        peak = deform.max()
        if peak <= 0:
            return 0.0
        plateau = ndimage.binary_erosion(deform > 0.6 * peak, iterations=4)
        if plateau.sum() < 100:
            return 0.0
        return float(deform[plateau].std())

    def features(self, img: DepthImage):
        """(half-FFT, full-FFT, ring spectrum, plateau spread, max
        deformation) for one image."""
        if self.reference is None:
            raise RuntimeError("classifier has no reference frame; call fit first")
        deform = np.clip(self.reference - img.data, 0.0, None)
        deform[~img.valid] = 0.0
        peak = deform.max()
        total = deform.sum()
        if total > 1e-9:
            h, w = deform.shape
            ys = np.arange(h)[:, None]
            xs = np.arange(w)[None, :]
            cy = float((ys * deform).sum() / total)
            cx = float((xs * deform).sum() / total)
        else:
            cy = (deform.shape[0] - 1) / 2.0
            cx = (deform.shape[1] - 1) / 2.0
        half = np.clip(deform - 0.5 * peak, 0.0, None) if peak > 0 else deform
        p_half = self._polar_map(half, cy, cx)
        p_full = self._polar_map(deform, cy, cx)
        return (
            np.fft.rfft(p_half, axis=1),
            np.fft.rfft(p_full, axis=1),
            self._ring_spectrum(deform),
            self._plateau_spread(deform),
            float(peak),
        )

    # -- fitting and prediction --------------------------------------------

    def fit(self, images, labels, reference: DepthImage):
        self.reference = reference.data
        self.classes = sorted(set(labels))
        halves, fulls, rings, spreads, depths = [], [], [], [], []
        for img in images:
            f_half, f_full, ring, spread, peak = self.features(img)
            halves.append(f_half)
            fulls.append(f_full)
            rings.append(ring)
            spreads.append(spread)
            depths.append(int(peak // self.params.depth_bin_mm))
        counts = {c: 0 for c in self.classes}
        for lab in labels:
            counts[lab] += 1
        for c, n in counts.items():
            if n == 0:
                raise ValueError(f"class {c!r} has no training samples")
        self._half = np.stack(halves)
        self._full = np.stack(fulls)
        self._rings = np.stack(rings)
        self._spreads = np.asarray(spreads)
        self._depth_bins = np.asarray(depths)
        self._labels = np.asarray(labels)
        return self

    def _distances(self, feat):
        """Per-prototype distance after jointly choosing the best rotation."""
        p = self.params
        f_half, f_full, ring, spread, peak = feat
        qbin = int(peak // p.depth_bin_mm)
        sel = np.abs(self._depth_bins - qbin) <= 1
        if not sel.any():
            sel = np.ones(len(self._depth_bins), dtype=bool)
        na = p.angular_bins
        corr_h = np.fft.irfft(
            (self._half[sel] * np.conj(f_half)).sum(axis=1), n=na, axis=1
        )
        corr_f = np.fft.irfft(
            (self._full[sel] * np.conj(f_full)).sum(axis=1), n=na, axis=1
        )
        joint = p.weight_half * corr_h + p.weight_full * corr_f
        best = joint.argmax(axis=1)[:, None]
        pick = lambda c: np.take_along_axis(c, best, axis=1)[:, 0]
        d_half = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * pick(corr_h)))
        d_full = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * pick(corr_f)))
        d_ring = np.linalg.norm(self._rings[sel] - ring, axis=1)
        d_spread = np.abs(self._spreads[sel] - spread)
        dist = (
            p.weight_half * d_half
            + p.weight_full * d_full
            + p.weight_ring * d_ring
            + p.weight_spread * d_spread
        )
        return dist, self._labels[sel]

    def predict(self, img: DepthImage) -> np.ndarray:
        """Per-class scores (softmax of negative best distances), summing to 1."""
        if self._labels is None:
            raise RuntimeError("classifier is not fitted")
        dist, labels = self._distances(self.features(img))
        best = np.full(len(self.classes), np.inf)
        for i, c in enumerate(self.classes):
            mask = labels == c
            if mask.any():
                best[i] = dist[mask].min()
        finite = np.isfinite(best)
        scores = np.zeros(len(self.classes))
        scores[finite] = np.exp(-(best[finite] - best[finite].min()))
        return scores / scores.sum()

    def predict_label(self, img: DepthImage):
        return self.classes[int(np.argmax(self.predict(img)))]

    def save(self, path):
        np.savez(
            path,
            kind="prototype",
            classes=np.array(self.classes),
            labels=self._labels,
            half=self._half,
            full=self._full,
            rings=self._rings,
            spreads=self._spreads,
            depth_bins=self._depth_bins,
            reference=self.reference,
            params=np.array(
                [
                    self.params.radial_bins,
                    self.params.angular_bins,
                    self.params.max_radius_px,
                    self.params.ring_bins,
                    self.params.ring_min_bin,
                    self.params.ring_max_freq,
                    self.params.pixel_mm[0],
                    self.params.pixel_mm[1],
                    self.params.depth_bin_mm,
                    self.params.weight_half,
                    self.params.weight_full,
                    self.params.weight_ring,
                    self.params.weight_spread,
                ]
            ),
        )

    @staticmethod
    def load(path) -> "PrototypeClassifier":
        data = np.load(path, allow_pickle=False)
        raw = data["params"]
        params = PrototypeParams(
            radial_bins=int(raw[0]),
            angular_bins=int(raw[1]),
            max_radius_px=float(raw[2]),
            ring_bins=int(raw[3]),
            ring_min_bin=int(raw[4]),
            ring_max_freq=float(raw[5]),
            pixel_mm=(float(raw[6]), float(raw[7])),
            depth_bin_mm=float(raw[8]),
            weight_half=float(raw[9]),
            weight_full=float(raw[10]),
            weight_ring=float(raw[11]),
            weight_spread=float(raw[12]),
        )
        clf = PrototypeClassifier(params)
        clf.classes = [str(c) for c in data["classes"]]
        clf._labels = np.array([str(c) for c in data["labels"]])
        clf._half = data["half"]
        clf._full = data["full"]
        clf._rings = data["rings"]
        clf._spreads = data["spreads"]
        clf._depth_bins = data["depth_bins"]
        clf.reference = data["reference"]
        return clf


class NearestCentroidClassifier:
    """Per-class centroids over pooled, L2-normalized deformation maps."""

    def __init__(self, feature_size: int = 28):
        self.feature_size = feature_size
        self.classes: list = []
        self.centroids: np.ndarray | None = None
        self.reference: np.ndarray | None = None

    def features(self, img: DepthImage) -> np.ndarray:
        if self.reference is None:
            raise RuntimeError("classifier has no reference frame; call fit first")
        deform = np.clip(self.reference - img.data, 0.0, None)
        deform[~img.valid] = 0.0
        f = self.feature_size
        pooled = _box_downscale(
            deform, np.ones_like(deform, dtype=bool), f, f
        ).ravel()
        norm = np.linalg.norm(pooled)
        return pooled / norm if norm > 0 else pooled

    def fit(self, images, labels, reference: DepthImage):
        self.reference = reference.data
        self.classes = sorted(set(labels))
        feats: dict = {c: [] for c in self.classes}
        for img, lab in zip(images, labels):
            feats[lab].append(self.features(img))
        for c in self.classes:
            if not feats[c]:
                raise ValueError(f"class {c!r} has no training samples")
        self.centroids = np.stack([np.mean(feats[c], axis=0) for c in self.classes])
        return self

    def predict(self, img: DepthImage) -> np.ndarray:
        """Per-class scores: normalized exponentials of negative distances."""
        if self.centroids is None:
            raise RuntimeError("classifier is not fitted")
        x = self.features(img)
        d = np.linalg.norm(self.centroids - x, axis=1)
        w = np.exp(-(d - d.min()))
        return w / w.sum()

    def predict_label(self, img: DepthImage):
        return self.classes[int(np.argmax(self.predict(img)))]

    def save(self, path):
        np.savez(
            path,
            classes=np.array(self.classes),
            centroids=self.centroids,
            reference=self.reference,
            feature_size=self.feature_size,
        )

    @staticmethod
    def load(path) -> "NearestCentroidClassifier":
        data = np.load(path, allow_pickle=False)
        clf = NearestCentroidClassifier(int(data["feature_size"]))
        clf.classes = [str(c) for c in data["classes"]]
        clf.centroids = data["centroids"]
        clf.reference = data["reference"]
        return clf


def _load_image(root, entry) -> DepthImage:
    return sbio.read_pgm16(Path(root) / entry.file)


def fit_on_manifest(
    manifest: DatasetManifest,
    root,
    level: int,
    classifier_factory=NearestCentroidClassifier,
):
    ref = degrade_resolution(sbio.read_pgm16(Path(root) / manifest.reference_file), level)
    train = manifest.split_entries("train")
    images = [degrade_resolution(_load_image(root, e), level) for e in train]
    labels = [e.label for e in train]
    clf = classifier_factory()
    clf.fit(images, labels, ref)
    return clf


def evaluate(
    manifest: DatasetManifest,
    root,
    levels,
    classifier_factory=NearestCentroidClassifier,
    split: str = "val",
):
    """Fit per level on degraded training images, score the requested split.

    Returns rows of (dataset, level, split, top1_accuracy, n_samples) with
    top-1 accuracy macro-averaged over classes.
    """
    rows = []
    val = manifest.split_entries(split)
    for level in levels:
        clf = fit_on_manifest(manifest, root, level, classifier_factory)
        per_class_hits: dict = {}
        per_class_n: dict = {}
        for e in val:
            img = degrade_resolution(_load_image(root, e), level)
            pred = clf.predict_label(img)
            per_class_n[e.label] = per_class_n.get(e.label, 0) + 1
            per_class_hits[e.label] = per_class_hits.get(e.label, 0) + (
                1 if pred == e.label else 0
            )
        acc = float(
            np.mean([per_class_hits[c] / per_class_n[c] for c in per_class_n])
        )
        rows.append((manifest.library, level, split, acc, len(val)))
    return rows


def write_metrics_csv(rows, path):
    lines = ["dataset,N,split,top1_accuracy,n_samples"]
    for dataset, level, split, acc, n in rows:
        lines.append(f"{dataset},{level},{split},{acc:.6f},{n}")
    Path(path).write_text("\n".join(lines) + "\n")
