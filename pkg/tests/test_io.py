"""File formats: round trips, quantization bounds, and deterministic JSON."""

import numpy as np
import pytest

from egodepth import io as eio
from egodepth.camera import DepthMap, Intrinsics, PointCloud
from egodepth.se3 import to_pose, to_vector
from egodepth.warp import Image


def random_depth(rng, h=8, w=10):
    valid = rng.uniform(size=(h, w)) > 0.2
    vals = np.where(valid, rng.uniform(0.5, 60, size=(h, w)), 1.0)
    return DepthMap(values=vals, valid=valid)


class TestCanonicalJson:
    def test_sorted_keys_and_fixed_floats(self):
        s = eio.dumps_canonical({"b": 1.5, "a": 2})
        assert s == '{"a": 2, "b": 1.5}'

    def test_seventeen_digit_round_trip(self):
        x = 0.1 + 0.2
        assert float(eio.format_float(x)) == x

    def test_numpy_types_handled(self):
        s = eio.dumps_canonical({"v": np.float64(1.25), "n": np.int32(3), "a": np.arange(2)})
        assert s == '{"a": [0, 1], "n": 3, "v": 1.25}'

    def test_deterministic_across_calls(self):
        obj = {"x": [1.0 / 3.0, 2.0 / 7.0], "flag": True, "none": None}
        assert eio.dumps_canonical(obj) == eio.dumps_canonical(dict(obj))


class TestPfm:
    def test_grayscale_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.uniform(-5, 5, size=(6, 9)).astype(np.float32).astype(np.float64)
        path = tmp_path / "a.pfm"
        eio.write_pfm(path, arr, scale=2.0)
        back, scale = eio.read_pfm(path)
        np.testing.assert_array_equal(back, arr)
        assert scale == 2.0

    def test_color_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        arr = rng.uniform(0, 1, size=(4, 5, 3)).astype(np.float32).astype(np.float64)
        path = tmp_path / "c.pfm"
        eio.write_pfm(path, arr)
        back, _ = eio.read_pfm(path)
        np.testing.assert_array_equal(back, arr)

    def test_depth_round_trip_preserves_validity(self, tmp_path):
        depth = random_depth(np.random.default_rng(2))
        path = tmp_path / "d.pfm"
        eio.write_depth_pfm(path, depth)
        back = eio.read_depth_pfm(path)
        np.testing.assert_array_equal(back.valid, depth.valid)
        np.testing.assert_allclose(
            back.values[back.valid], depth.values[depth.valid].astype(np.float32),
            rtol=1e-7,
        )

    def test_rejects_non_pfm(self, tmp_path):
        path = tmp_path / "x.pfm"
        path.write_bytes(b"JUNK\n")
        with pytest.raises(ValueError):
            eio.read_pfm(path)


class TestDepthPng:
    def test_quantization_within_half_step(self, tmp_path):
        depth = random_depth(np.random.default_rng(3))
        path = tmp_path / "d.png"
        eio.write_depth_png(path, depth)
        back = eio.read_depth_png(path)
        np.testing.assert_array_equal(back.valid, depth.valid)
        err = np.abs(back.values[back.valid] - depth.values[depth.valid])
        assert err.max() <= 0.5 / 256.0 + 1e-12

    def test_invalid_stored_as_zero(self, tmp_path):
        depth = DepthMap(values=np.ones((2, 2)), valid=np.array([[True, False], [True, True]]))
        path = tmp_path / "d.png"
        eio.write_depth_png(path, depth)
        assert not eio.read_depth_png(path).valid[0, 1]


class TestImages:
    def test_png_round_trip_gray(self, tmp_path):
        img = Image(np.round(np.random.default_rng(4).uniform(size=(5, 7, 1)) * 255) / 255)
        path = tmp_path / "g.png"
        eio.write_image_png(path, img)
        np.testing.assert_allclose(eio.read_image_png(path).data, img.data, atol=1e-12)

    def test_png_round_trip_rgb(self, tmp_path):
        img = Image(np.round(np.random.default_rng(5).uniform(size=(5, 7, 3)) * 255) / 255)
        path = tmp_path / "c.png"
        eio.write_image_png(path, img)
        np.testing.assert_allclose(eio.read_image_png(path).data, img.data, atol=1e-12)

    def test_ppm_round_trip(self, tmp_path):
        img = Image(np.round(np.random.default_rng(6).uniform(size=(4, 6, 3)) * 255) / 255)
        path = tmp_path / "c.ppm"
        eio.write_image_ppm(path, img)
        np.testing.assert_allclose(eio.read_image_ppm(path).data, img.data, atol=1e-12)

    def test_mask_round_trip(self, tmp_path):
        mask = np.random.default_rng(7).uniform(size=(9, 9)) > 0.5
        path = tmp_path / "m.png"
        eio.write_mask_png(path, mask)
        np.testing.assert_array_equal(eio.read_mask_png(path), mask)


class TestPly:
    def test_round_trip_points(self, tmp_path):
        rng = np.random.default_rng(8)
        valid = rng.uniform(size=(3, 4)) > 0.3
        cloud = PointCloud(points=rng.normal(size=(3, 4, 3)), valid=valid)
        path = tmp_path / "c.ply"
        eio.write_ply(path, cloud)
        back, normals = eio.read_ply(path)
        assert normals is None
        np.testing.assert_allclose(
            back.points.reshape(-1, 3), cloud.valid_points(), atol=1e-12
        )

    def test_round_trip_with_normals(self, tmp_path):
        rng = np.random.default_rng(9)
        cloud = PointCloud(points=rng.normal(size=(2, 5, 3)))
        normals = rng.normal(size=(2, 5, 3))
        path = tmp_path / "n.ply"
        eio.write_ply(path, cloud, normals=normals)
        back, back_n = eio.read_ply(path)
        np.testing.assert_allclose(back_n.reshape(-1, 3), normals.reshape(-1, 3), atol=1e-12)

    def test_rejects_non_ply(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_text("OFF\n")
        with pytest.raises(ValueError):
            eio.read_ply(path)


class TestPosesAndTrajectories:
    def test_pose_json_round_trip(self, tmp_path):
        v = np.array([0.1, -0.2, 0.3, 1.5, 0.0, -2.0])
        path = tmp_path / "p.json"
        eio.write_pose_json(path, to_pose(v))
        np.testing.assert_allclose(to_vector(eio.read_pose_json(path)), v, atol=1e-15)

    def test_trajectory_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        poses = [to_pose(rng.normal(scale=0.3, size=6)) for _ in range(5)]
        path = tmp_path / "t.txt"
        eio.write_trajectory_kitti(path, poses)
        back = eio.read_trajectory_kitti(path)
        assert len(back) == 5
        for a, b in zip(poses, back):
            np.testing.assert_allclose(a.matrix_3x4, b.matrix_3x4, atol=1e-15)

    def test_trajectory_rejects_short_lines(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 0 0\n")
        with pytest.raises(ValueError):
            eio.read_trajectory_kitti(path)

    def test_intrinsics_round_trip(self, tmp_path):
        k = Intrinsics(fx=718.856, fy=718.856, cx=607.1928, cy=185.2157, width=1241, height=376)
        path = tmp_path / "k.json"
        eio.write_intrinsics_json(path, k)
        assert eio.read_intrinsics_json(path) == k
