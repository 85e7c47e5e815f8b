"""Synthetic scene oracle: analytic depth, view-independent texture, and
frame pairs with exactly known ground truth."""

import json

import numpy as np
import pytest

from egodepth.camera import Intrinsics
from egodepth.se3 import Pose, to_pose
from egodepth.synth import (
    Box,
    Plane,
    Scene,
    Sphere,
    Texture,
    builtin_scenes,
    default_scene,
    make_pair,
    render,
)

K = Intrinsics(fx=100.0, fy=100.0, cx=15.5, cy=15.5, width=32, height=32)
K_CENTERED = Intrinsics(fx=100.0, fy=100.0, cx=16.0, cy=16.0, width=33, height=33)


class TestPrimitives:
    def test_plane_depth_constant(self):
        scene = Scene(
            primitives=(Plane(point=(0, 0, 3.0), normal=(0, 0, -1.0)),),
            texture=Texture(amplitude=0.0),
        )
        _, depth = render(scene, Pose.identity(), K)
        assert depth.valid.all()
        np.testing.assert_allclose(depth.values, 3.0, atol=1e-12)

    def test_sphere_center_ray_depth(self):
        # camera at origin looking at a sphere centered on the optical axis:
        # depth along the center ray = distance to center - radius
        scene = Scene(
            primitives=(Sphere(center=(0.0, 0.0, 5.0), radius=1.5),),
            texture=Texture(amplitude=0.0),
        )
        _, depth = render(scene, Pose.identity(), K_CENTERED)
        assert depth.values[16, 16] == pytest.approx(3.5, abs=1e-12)

    def test_sphere_miss_is_invalid(self):
        scene = Scene(
            primitives=(Sphere(center=(0.0, 0.0, 5.0), radius=0.1),),
            texture=Texture(amplitude=0.0),
        )
        _, depth = render(scene, Pose.identity(), K)
        assert not depth.valid.all()
        assert depth.valid[16, 16] or depth.valid[15, 15]

    def test_box_front_face_depth(self):
        scene = Scene(
            primitives=(Box(lo=(-5, -5, 2.0), hi=(5, 5, 4.0)),),
            texture=Texture(amplitude=0.0),
        )
        _, depth = render(scene, Pose.identity(), K)
        np.testing.assert_allclose(depth.values, 2.0, atol=1e-12)

    def test_nearest_primitive_wins(self):
        scene = Scene(
            primitives=(
                Plane(point=(0, 0, 4.0), normal=(0, 0, -1.0)),
                Plane(point=(0, 0, 2.0), normal=(0, 0, -1.0)),
            ),
            texture=Texture(amplitude=0.0),
        )
        _, depth = render(scene, Pose.identity(), K)
        np.testing.assert_allclose(depth.values, 2.0, atol=1e-12)


class TestTexture:
    def test_intensity_in_unit_interval(self):
        rng = np.random.default_rng(0)
        tex = Texture(seed=3, frequency=1.0, amplitude=0.45, ramp=(0.2, 0.1, 0.05))
        pts = rng.uniform(-4, 4, size=(1000, 3))
        vals = tex.evaluate(pts)
        assert vals.min() >= 0.0 and vals.max() <= 1.0

    def test_view_independent(self):
        # the same 3D point gives the same intensity from any camera
        tex = Texture(seed=1, frequency=0.3, amplitude=0.3)
        pts = np.random.default_rng(1).uniform(-2, 2, size=(50, 3))
        np.testing.assert_array_equal(tex.evaluate(pts), tex.evaluate(pts.copy()))

    def test_seed_changes_pattern(self):
        pts = np.random.default_rng(2).uniform(-2, 2, size=(50, 3))
        a = Texture(seed=1, amplitude=0.3).evaluate(pts)
        b = Texture(seed=2, amplitude=0.3).evaluate(pts)
        assert np.abs(a - b).max() > 1e-3


class TestRenderPair:
    def test_deterministic(self):
        ego = to_pose(np.array([0, 0, 0, 0.05, 0.02, 0]))
        a = make_pair(default_scene(), ego, K)
        b = make_pair(default_scene(), ego, K)
        np.testing.assert_array_equal(a.image_t.data, b.image_t.data)
        np.testing.assert_array_equal(a.depth_tm1.values, b.depth_tm1.values)

    def test_identity_ego_gives_identical_frames(self):
        pair = make_pair(default_scene(), Pose.identity(), K)
        np.testing.assert_array_equal(pair.image_t.data, pair.image_tm1.data)
        np.testing.assert_array_equal(pair.depth_t.values, pair.depth_tm1.values)

    def test_translated_view_shifts_content(self):
        # fronto-parallel plane at depth d seen from a camera shifted by tx:
        # the image content shifts by fx*tx/d pixels
        d, tx = 2.0, 0.04  # shift = 100*0.04/2 = 2 pixels
        scene = default_scene()
        pair = make_pair(scene, to_pose(np.array([0, 0, 0, tx, 0, 0])), K)
        shift = int(K.fx * tx / d)
        a = pair.image_tm1.data[:, shift:, 0]
        b = pair.image_t.data[:, :-shift, 0]
        assert np.abs(a - b).max() < 1e-9

    def test_pose_is_point_transform_between_frames(self):
        # a world point's frame-t coordinates, pushed through the pair's
        # pose, must land on its frame-(t-1) camera coordinates
        ego = to_pose(np.array([0.0, 0.03, 0.0, 0.1, 0.0, 0.02]))
        pair = make_pair(default_scene(), ego, K)
        from egodepth.camera import backproject
        from egodepth.se3 import transform_cloud
        cloud_t = backproject(pair.depth_t, K)
        moved = transform_cloud(ego, cloud_t)
        # project into frame t-1 and compare against its own depth
        from egodepth.camera import project
        coords, in_front = project(moved, K)
        j, i = 16, 16
        u, v = coords[j, i]
        assert in_front[j, i]
        iu, iv = int(round(u)), int(round(v))
        if abs(u - iu) < 1e-6 and abs(v - iv) < 1e-6:
            assert moved.points[j, i, 2] == pytest.approx(
                pair.depth_tm1.values[iv, iu], rel=1e-9
            )


class TestSceneSerialization:
    def test_from_dict_round_trip(self):
        d = {
            "primitives": [
                {"type": "plane", "point": [0, 0, 2], "normal": [0, 0, -1]},
                {"type": "sphere", "center": [1, 0, 5], "radius": 0.5},
                {"type": "box", "lo": [-1, -1, 3], "hi": [1, 1, 4]},
            ],
            "texture": {"seed": 7, "frequency": 0.25, "amplitude": 0.2},
        }
        scene = Scene.from_dict(d)
        assert len(scene.primitives) == 3
        assert scene.texture.seed == 7

    def test_from_json(self, tmp_path):
        path = tmp_path / "scene.json"
        path.write_text(json.dumps({
            "primitives": [{"type": "plane", "point": [0, 0, 2], "normal": [0, 0, -1]}],
        }))
        scene = Scene.from_json(path)
        assert isinstance(scene.primitives[0], Plane)

    def test_unknown_primitive_rejected(self):
        with pytest.raises(ValueError):
            Scene.from_dict({"primitives": [{"type": "torus"}]})

    def test_empty_scene_rejected(self):
        with pytest.raises(ValueError):
            Scene(primitives=())

    def test_builtin_scenes_exist(self):
        scenes = builtin_scenes()
        assert set(scenes) == {"plane", "plane_waves", "plane_lowtex"}
