"""Randomized invariants (hypothesis)."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from softbubble.classify import PrototypeClassifier, degrade_resolution
from softbubble.geometry import DepthImage, PointCloud, RigidTransform, compose, invert
from softbubble.pose import crop_model
from softbubble.touch import TouchConfig, capture_reference, is_touch

settings.register_profile("suite", deadline=None, max_examples=25)
settings.load_profile("suite")

finite = st.floats(-100.0, 100.0, allow_nan=False)
angles = st.floats(-math.pi, math.pi, allow_nan=False)
axes = st.tuples(finite, finite, finite).filter(
    lambda a: np.linalg.norm(a) > 1e-3
)
transforms = st.builds(
    lambda axis, ang, t: RigidTransform.from_axis_angle(axis, ang, t),
    axes,
    angles,
    st.tuples(finite, finite, finite),
)


@given(transforms)
def test_transform_inverse_round_trip(t):
    delta = compose(invert(t), t)
    assert delta.rotation_angle() < 1e-9
    assert np.linalg.norm(delta.translation) < 1e-6


@given(transforms, st.integers(0, 2**31))
def test_apply_then_invert_recovers_points(t, seed):
    pts = np.random.default_rng(seed).uniform(-50, 50, size=(10, 3))
    back = invert(t).apply(t.apply(pts))
    assert np.allclose(back, pts, atol=1e-6)


@given(transforms, transforms, transforms)
def test_compose_associative(a, b, c):
    left = compose(compose(a, b), c)
    right = compose(a, compose(b, c))
    delta = compose(invert(left), right)
    assert delta.rotation_angle() < 1e-9
    assert np.linalg.norm(delta.translation) < 1e-5


@given(st.integers(0, 5), st.integers(0, 2**31))
def test_degrade_resolution_shape_and_bounds(level, seed):
    rng = np.random.default_rng(seed)
    img = DepthImage(rng.uniform(100.0, 160.0, size=(171, 224)))
    out = degrade_resolution(img, level)
    assert out.data.shape == (224, 224)
    assert out.data.min() >= img.data.min() - 1e-9
    assert out.data.max() <= img.data.max() + 1e-9


@given(st.integers(0, 2**31))
def test_touch_count_monotone_in_threshold(seed):
    rng = np.random.default_rng(seed)
    ref_data = rng.uniform(100.0, 150.0, size=(40, 40))
    ref = capture_reference([DepthImage(ref_data)])
    img = DepthImage(ref_data - rng.uniform(0.0, 12.0, size=(40, 40)))
    counts = [
        is_touch(img, ref, TouchConfig(deviation_threshold=d, median_filter=False))[1]
        for d in (2.0, 5.0, 8.0, 11.0)
    ]
    assert counts == sorted(counts, reverse=True)


@given(
    st.integers(0, 2**31),
    st.floats(0.0, 0.25, allow_nan=False),
    axes,
)
def test_crop_model_returns_subset(seed, fraction, normal):
    pts = np.random.default_rng(seed).uniform(-50, 50, size=(200, 3))
    out = crop_model(PointCloud(pts), normal, fraction)
    assert len(out) >= 1
    rows = {tuple(p) for p in pts}
    assert all(tuple(p) in rows for p in out.points)


@given(st.integers(0, 2**31))
def test_classifier_probabilities_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    ref_data = np.full((171, 224), 154.0)
    ref = DepthImage(ref_data)
    clf = PrototypeClassifier()
    imgs = []
    labels = []
    for cls, sl in (("a", slice(60, 100)), ("b", slice(40, 120))):
        data = ref_data.copy()
        data[sl, 80:140] -= 20.0
        imgs.append(DepthImage(data))
        labels.append(cls)
    clf.fit(imgs, labels, ref)
    probe = ref_data - rng.uniform(0.0, 5.0, size=ref_data.shape)
    probs = clf.predict(DepthImage(probe))
    assert probs.shape == (len(clf.classes),)
    assert np.all(probs >= 0.0)
    assert abs(probs.sum() - 1.0) < 1e-9
