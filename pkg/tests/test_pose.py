"""ICP registration, multi-init pose estimation and the windowed tracker."""

import math

import numpy as np
import pytest

from softbubble.geometry import PointCloud, RigidTransform, compose, invert
from softbubble.objects import cube_mesh, frustum_mesh, surface_cloud
from softbubble.pose import (
    IcpParams,
    PoseTracker,
    best_fit_transform,
    crop_model,
    estimate_pose,
    icp,
    pose_errors,
    symmetry_group_z,
)


def random_small_transform(rng, max_deg=5.0, max_mm=5.0):
    axis = rng.normal(size=3)
    angle = math.radians(rng.uniform(0.0, max_deg))
    t = rng.uniform(-max_mm, max_mm, size=3)
    return RigidTransform.from_axis_angle(axis, angle, t)


class TestCropModel:
    def test_fraction_zero_is_identity(self):
        cloud = surface_cloud(cube_mesh(), n=500)
        out = crop_model(cloud, (0, 0, 1), 0.0)
        assert np.array_equal(out.points, cloud.points)

    def test_fraction_bounds(self):
        cloud = surface_cloud(cube_mesh(), n=100)
        with pytest.raises(ValueError):
            crop_model(cloud, (0, 0, 1), 0.3)
        with pytest.raises(ValueError):
            crop_model(cloud, (0, 0, 1), -0.01)

    def test_quarter_crop_of_uniform_cube(self):
        rng = np.random.default_rng(10)
        pts = rng.uniform(0.0, 40.0, size=(1000, 3))
        out = crop_model(PointCloud(pts), (0, 0, 1), 0.25)
        assert abs(len(out) - 750) <= 30
        # the far side along +z is gone
        assert out.points[:, 2].max() <= 30.0 + 1e-9

    def test_empty_model_errors(self):
        with pytest.raises(ValueError):
            crop_model(PointCloud(np.zeros((0, 3))), (0, 0, 1), 0.1)


class TestBestFitTransform:
    def test_recovers_exact_transform(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            src = rng.uniform(-30, 30, size=(5, 3))
            t = random_small_transform(rng, max_deg=180.0, max_mm=50.0)
            est = best_fit_transform(src, t.apply(src))
            delta = compose(invert(t), est)
            assert delta.rotation_angle() < 1e-9
            assert np.linalg.norm(delta.translation) < 1e-9

    def test_optimal_among_random_alternatives(self):
        rng = np.random.default_rng(12)
        src = rng.uniform(-30, 30, size=(5, 3))
        dst = src + rng.normal(scale=2.0, size=(5, 3))
        est = best_fit_transform(src, dst)

        def cost(t):
            return float(np.sum((t.apply(src) - dst) ** 2))

        best_cost = cost(est)
        for _ in range(1000):
            perturbed = compose(random_small_transform(rng, 20.0, 5.0), est)
            assert cost(perturbed) >= best_cost - 1e-9


class TestIcp:
    def test_identity_on_identical_clouds(self):
        model = surface_cloud(frustum_mesh(), n=400)
        est = icp(model, model, RigidTransform.identity())
        assert est.success
        assert est.fitness < 1e-6
        assert est.pose.rotation_angle() < 1e-6

    def test_recovers_small_perturbation(self):
        rng = np.random.default_rng(13)
        model = surface_cloud(frustum_mesh(), n=400)
        for _ in range(5):
            t = random_small_transform(rng, 5.0, 5.0)
            sensed = PointCloud(t.apply(model.points))
            est = icp(sensed, model, RigidTransform.identity())
            assert est.success
            terr, rerr = pose_errors(est.pose, t)
            assert terr < 0.5
            assert math.degrees(rerr) < 0.5

    def test_disjoint_clouds_fail(self):
        model = surface_cloud(cube_mesh(), n=100)
        far = PointCloud(model.points + np.array([1000.0, 0.0, 0.0]))
        est = icp(far, model, RigidTransform.identity())
        assert not est.success

    def test_too_few_points_fail(self):
        tiny = PointCloud(np.zeros((2, 3)))
        model = surface_cloud(cube_mesh(), n=100)
        assert not icp(tiny, model, RigidTransform.identity()).success
        assert not icp(model, tiny, RigidTransform.identity()).success

    def test_fitness_not_worse_than_init(self):
        rng = np.random.default_rng(14)
        model = surface_cloud(frustum_mesh(), n=400)
        t = random_small_transform(rng, 8.0, 8.0)
        sensed = PointCloud(t.apply(model.points))
        init_rms = float(np.sqrt(np.mean((model.points - sensed.points) ** 2)))
        est = icp(sensed, model, RigidTransform.identity())
        assert est.success
        assert est.fitness <= init_rms

    def test_params_validation(self):
        with pytest.raises(ValueError):
            IcpParams(max_iterations=0)
        with pytest.raises(ValueError):
            IcpParams(inlier_threshold=-0.1)


class TestEstimatePose:
    def test_n_inits_bounds(self):
        model = surface_cloud(cube_mesh(), n=100)
        with pytest.raises(ValueError):
            estimate_pose(model, model, (0, 0, 1), n_inits=0)
        with pytest.raises(ValueError):
            estimate_pose(model, model, (0, 0, 1), n_inits=13)

    def test_empty_patch_fails(self):
        model = surface_cloud(cube_mesh(), n=100)
        est = estimate_pose(PointCloud(np.zeros((0, 3))), model, (0, 0, 1), 4)
        assert not est.success

    def test_symmetric_cube_matches_up_to_symmetry(self):
        rng = np.random.default_rng(15)
        model = surface_cloud(cube_mesh(), n=800)
        group = symmetry_group_z(4)
        truth = RigidTransform.from_axis_angle(
            (0, 0, 1), math.radians(115.0), (4.0, -3.0, 2.0)
        )
        # sense the lower 3/4, matching the default model crop fraction
        pts = model.points[model.points[:, 2] < 30.0]
        sensed = PointCloud(truth.apply(pts))
        est = estimate_pose(sensed, model, (0, 0, 1), n_inits=12)
        assert est.success
        terr, rerr = pose_errors(est.pose, truth, group)
        assert terr < 1.0
        assert math.degrees(rerr) < 2.0

    def test_equivariance(self):
        model = surface_cloud(frustum_mesh(), n=600)
        pts = model.points[model.points[:, 2] < 8.0]
        base = PointCloud(pts)
        g = RigidTransform.from_axis_angle((0, 0, 1), 0.4, (6.0, -2.0, 1.0))
        est0 = estimate_pose(base, model, (0, 0, 1), n_inits=12)
        est1 = estimate_pose(PointCloud(g.apply(pts)), model, (0, 0, 1), n_inits=12)
        assert est0.success and est1.success
        expected = compose(g, est0.pose)
        terr, rerr = pose_errors(est1.pose, expected, symmetry_group_z(4))
        assert terr < 1.0
        assert math.degrees(rerr) < 2.0


class TestTracker:
    @staticmethod
    def sensed(model, yaw_deg):
        t = RigidTransform.from_axis_angle((0, 0, 1), math.radians(yaw_deg))
        pts = model.points[model.points[:, 2] < 10.0]
        return PointCloud(t.apply(pts)), t

    def test_static_object_stable(self):
        model = surface_cloud(frustum_mesh(), n=600)
        tracker = PoseTracker(model)
        cloud, _ = self.sensed(model, 30.0)
        first = tracker.initialize(cloud)
        assert first.success
        poses = []
        for _ in range(10):
            est = tracker.step(cloud)
            assert est.success
            assert est.init_index <= 2  # at most 3 window initializations
            poses.append(est.pose)
        for p in poses[1:]:
            delta = compose(invert(poses[0]), p)
            assert np.linalg.norm(delta.translation) < 1.0
            assert math.degrees(delta.rotation_angle()) < 1.0

    def test_follows_rotation(self):
        model = surface_cloud(frustum_mesh(), n=600)
        tracker = PoseTracker(model)
        cloud, _ = self.sensed(model, 0.0)
        assert tracker.initialize(cloud).success
        group = symmetry_group_z(4)
        for k in range(1, 8):
            cloud, truth = self.sensed(model, 5.0 * k)
            est = tracker.step(cloud)
            assert est.success
            terr, rerr = pose_errors(est.pose, truth, group)
            assert math.degrees(rerr) < 3.0

    def test_empty_frame_emits_failure_and_keeps_state(self):
        model = surface_cloud(frustum_mesh(), n=600)
        tracker = PoseTracker(model)
        cloud, _ = self.sensed(model, 10.0)
        assert tracker.initialize(cloud).success
        before = tracker.state.last
        est = tracker.step(PointCloud(np.zeros((0, 3))))
        assert not est.success
        assert tracker.state.last is before
        # recovery on the next good frame
        assert tracker.step(cloud).success
