"""Touch discrimination and naive contact-patch extraction."""

import numpy as np
import pytest
from scipy import ndimage

from softbubble.geometry import DepthImage, GeometryError, RigidTransform
from softbubble.membrane import build_obstacle, solve_membrane
from softbubble.objects import two_sphere_mesh
from softbubble.render import NoiseModel, apply_noise, render_depth
from softbubble.touch import (
    EIGHT_CONNECTED,
    TouchConfig,
    capture_reference,
    extract_contact,
    is_touch,
)


def pressed_square(ref, rows, cols, amount):
    """Reference frame with a rectangular block pushed `amount` mm closer."""
    data = np.where(ref.valid, ref.depth, 0.0).copy()
    data[rows, cols] -= amount
    return DepthImage(data)


class TestTouchConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TouchConfig(deviation_threshold=0.0)
        with pytest.raises(ValueError):
            TouchConfig(min_pixels=0)


class TestCaptureReference:
    def test_single_noiseless_frame(self, rest_img):
        ref = capture_reference([rest_img])
        assert np.array_equal(ref.depth[ref.valid], rest_img.data[rest_img.valid])
        assert np.array_equal(ref.valid, rest_img.valid)

    def test_zero_frames_error(self):
        with pytest.raises(ValueError):
            capture_reference([])

    def test_mismatched_dimensions_error(self, rest_img):
        with pytest.raises(GeometryError):
            capture_reference([rest_img, DepthImage(np.ones((4, 4)))])

    def test_averaging_suppresses_noise(self, rig, rest_img):
        frames = [
            apply_noise(rest_img, NoiseModel(0.01, seed=s), rig.camera)
            for s in range(100)
        ]
        ref = capture_reference(frames)
        err = np.abs(ref.depth - rest_img.data)[rest_img.valid]
        # per-pixel sigma is ~1.5 mm at this range; averaging 100 frames
        # brings the error to ~0.15 mm with Gaussian tails above it
        assert np.quantile(err, 0.999) < 0.5
        assert err.max() < 1.0


class TestIsTouch:
    def test_reference_frame_is_no_touch(self, rest_img, reference):
        touching, count = is_touch(rest_img, reference, TouchConfig())
        assert not touching and count == 0

    def test_synthetic_press_detected(self, reference):
        img = pressed_square(reference, slice(70, 90), slice(100, 120), 10.0)
        touching, count = is_touch(img, reference, TouchConfig())
        assert touching
        assert count >= 18 * 18  # median filter may trim the block edge

    def test_deviation_below_threshold_ignored(self, reference):
        img = pressed_square(reference, slice(70, 90), slice(100, 120), 4.0)
        touching, _ = is_touch(img, reference, TouchConfig())
        assert not touching

    def test_away_from_camera_never_counts(self, reference):
        img = pressed_square(reference, slice(70, 90), slice(100, 120), -20.0)
        touching, count = is_touch(img, reference, TouchConfig())
        assert not touching and count == 0

    def test_count_monotone_in_threshold(self, reference):
        rng = np.random.default_rng(8)
        data = np.where(reference.valid, reference.depth, 0.0)
        data -= rng.uniform(0.0, 12.0, size=data.shape) * reference.valid
        img = DepthImage(np.clip(data, 0.0, None))
        counts = [
            is_touch(img, reference, TouchConfig(deviation_threshold=d))[1]
            for d in (2.0, 4.0, 6.0, 8.0, 10.0)
        ]
        assert counts == sorted(counts, reverse=True)

    def test_noise_only_frames_no_false_positive(self, rig, rest_img, reference):
        cfg = TouchConfig()
        for seed in range(100):
            noisy = apply_noise(rest_img, NoiseModel(0.01, seed=seed), rig.camera)
            touching, _ = is_touch(noisy, reference, cfg)
            assert not touching

    def test_small_dropouts_do_not_flip_detection(self, reference):
        rng = np.random.default_rng(9)
        img = pressed_square(reference, slice(70, 90), slice(100, 120), 10.0)
        data = img.data.copy()
        rr = rng.integers(0, data.shape[0], 20)
        cc = rng.integers(0, data.shape[1], 20)
        data[rr, cc] = 0.0  # invalid pixels are excluded from the count
        touching, _ = is_touch(DepthImage(data), reference, TouchConfig())
        assert touching


class TestExtractContact:
    def test_single_press_one_component(self, reference, rig):
        img = pressed_square(reference, slice(70, 90), slice(100, 120), 10.0)
        patch = extract_contact(img, reference, rig.camera, TouchConfig())
        assert patch.n_components == 1
        assert len(patch.points) > 0
        # all extracted points deviated toward the camera
        assert np.all(patch.points[:, 2] < rig.standoff + rig.bubble.inflation_height)

    def test_no_touch_frame_empty_patch(self, rest_img, reference, rig):
        patch = extract_contact(rest_img, reference, rig.camera, TouchConfig())
        assert patch.n_components == 0
        assert len(patch.points) == 0

    def test_two_separate_presses_two_components(self, reference, rig):
        img = pressed_square(reference, slice(60, 75), slice(60, 75), 10.0)
        img = DepthImage(img.data)
        img.data[95:110, 140:155] -= 10.0
        patch = extract_contact(img, reference, rig.camera, TouchConfig())
        assert patch.n_components == 2

    def test_bridging_merges_two_sphere_contacts(self, cfg, rig, reference):
        mesh = two_sphere_mesh(gap=20.0, radius=15.0)
        pose = RigidTransform(translation=(0.0, 0.0, cfg.inflation_height - 15.0))
        hf = solve_membrane(cfg, build_obstacle(mesh, pose, cfg))
        img = render_depth(rig, hf)
        patch = extract_contact(img, reference, rig.camera, TouchConfig())
        n_true = int(ndimage.label(hf.contact, structure=EIGHT_CONNECTED)[1])
        assert n_true == 2
        assert patch.n_components == 1
