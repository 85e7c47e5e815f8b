"""Multi-scale pyramid: pooling semantics, intrinsics consistency, and the
adjoint property of the gradient lift."""

import numpy as np
import pytest

from egodepth.camera import DepthMap, Intrinsics, backproject
from egodepth.pyramid import build_pyramid, lift_depth_gradient
from egodepth.warp import Image


def k_for(w, h, f=100.0):
    return Intrinsics(fx=f, fy=f, cx=(w - 1) / 2, cy=(h - 1) / 2, width=w, height=h)


class TestShapes:
    def test_kitti_resolution_level_sizes(self):
        k = k_for(416, 128)
        img = Image(np.zeros((128, 416, 3)))
        d = DepthMap(values=np.ones((128, 416)))
        pyr = build_pyramid(img, d, k, num_levels=4)
        sizes = [lvl.depth.shape for lvl in pyr.levels]
        assert sizes == [(128, 416), (64, 208), (32, 104), (16, 52)]

    def test_rejects_indivisible_dimensions(self):
        k = k_for(12, 12)
        with pytest.raises(ValueError):
            build_pyramid(
                Image(np.zeros((12, 12, 1))), DepthMap(values=np.ones((12, 12))),
                k, num_levels=4,
            )

    def test_rejects_bad_level_count(self):
        k = k_for(16, 16)
        with pytest.raises(ValueError):
            build_pyramid(
                Image(np.zeros((16, 16, 1))), DepthMap(values=np.ones((16, 16))),
                k, num_levels=5,
            )


class TestPooling:
    def test_constant_image_stays_constant(self):
        k = k_for(16, 16)
        img = Image(np.full((16, 16, 1), 0.375))
        pyr = build_pyramid(img, DepthMap(values=np.ones((16, 16))), k)
        for lvl in pyr.levels:
            np.testing.assert_array_equal(lvl.image.data, 0.375)

    def test_mean_intensity_preserved(self):
        rng = np.random.default_rng(0)
        k = k_for(32, 32)
        img = Image(rng.uniform(size=(32, 32, 3)))
        pyr = build_pyramid(img, DepthMap(values=np.ones((32, 32))), k)
        ref = img.data.mean(axis=(0, 1))
        for lvl in pyr.levels:
            np.testing.assert_allclose(lvl.image.data.mean(axis=(0, 1)), ref, atol=1e-12)

    def test_depth_pooling_hand_case(self):
        k = k_for(4, 4)
        vals = np.ones((4, 4))
        valid = np.ones((4, 4), dtype=bool)
        vals[0, 0], vals[0, 1], vals[1, 0], vals[1, 1] = 1.0, 3.0, 5.0, 100.0
        valid[1, 1] = False
        pyr = build_pyramid(
            Image(np.zeros((4, 4, 1))), DepthMap(values=vals, valid=valid),
            k, num_levels=2,
        )
        coarse = pyr.levels[1].depth
        assert coarse.values[0, 0] == pytest.approx(3.0)  # mean of the 3 valid
        assert coarse.valid[0, 0]

    def test_all_invalid_cell_becomes_invalid(self):
        k = k_for(4, 4)
        valid = np.ones((4, 4), dtype=bool)
        valid[:2, :2] = False
        pyr = build_pyramid(
            Image(np.zeros((4, 4, 1))),
            DepthMap(values=np.ones((4, 4)), valid=valid),
            k, num_levels=2,
        )
        assert not pyr.levels[1].depth.valid[0, 0]
        assert pyr.levels[1].depth.valid[0, 1]

    def test_intrinsics_halve_per_level(self):
        k = k_for(32, 16)
        pyr = build_pyramid(
            Image(np.zeros((16, 32, 1))), DepthMap(values=np.ones((16, 32))), k
        )
        for s, lvl in enumerate(pyr.levels):
            assert lvl.intrinsics.fx == pytest.approx(k.fx / 2**s)
            assert lvl.intrinsics.width == 32 // 2**s

    def test_constant_plane_geometry_consistent_across_levels(self):
        # back-projecting a constant-depth plane at any level lands on the
        # same world plane
        k = k_for(32, 32)
        d = 2.5
        pyr = build_pyramid(
            Image(np.zeros((32, 32, 1))), DepthMap(values=np.full((32, 32), d)), k
        )
        for lvl in pyr.levels:
            cloud = backproject(lvl.depth, lvl.intrinsics)
            assert np.abs(cloud.points[..., 2] - d).max() < 1e-9


class TestGradientLift:
    def test_adjoint_of_pooling(self):
        # <pool(x), g> == <x, lift(g)> for every level, including holes
        rng = np.random.default_rng(1)
        k = k_for(16, 16)
        valid = rng.uniform(size=(16, 16)) > 0.2
        valid[:2, :2] = True
        vals = np.where(valid, rng.uniform(1, 5, size=(16, 16)), 1.0)
        pyr = build_pyramid(
            Image(np.zeros((16, 16, 1))), DepthMap(values=vals, valid=valid), k
        )
        for level in range(1, 4):
            g = rng.normal(size=pyr.levels[level].depth.shape)
            lifted = lift_depth_gradient(pyr, level, g)
            lhs = float((pyr.levels[level].depth.values * g).sum())
            # pooling is linear in the fine values over valid pixels only
            eps = 1e-6
            probe = rng.normal(size=vals.shape)
            bumped = np.where(valid, vals + eps * probe, vals)
            pyr2 = build_pyramid(
                Image(np.zeros((16, 16, 1))),
                DepthMap(values=bumped, valid=valid), k,
            )
            lhs_bumped = float((pyr2.levels[level].depth.values * g).sum())
            directional = (lhs_bumped - lhs) / eps
            assert directional == pytest.approx(float((lifted * probe).sum()), abs=1e-5)

    def test_level_zero_is_identity(self):
        k = k_for(8, 8)
        pyr = build_pyramid(
            Image(np.zeros((8, 8, 1))), DepthMap(values=np.ones((8, 8))), k,
            num_levels=1,
        )
        g = np.random.default_rng(2).normal(size=(8, 8))
        np.testing.assert_array_equal(lift_depth_gradient(pyr, 0, g), g)

    def test_invalid_fine_pixels_get_zero_gradient(self):
        k = k_for(4, 4)
        valid = np.ones((4, 4), dtype=bool)
        valid[0, 0] = False
        pyr = build_pyramid(
            Image(np.zeros((4, 4, 1))),
            DepthMap(values=np.ones((4, 4)), valid=valid), k, num_levels=2,
        )
        lifted = lift_depth_gradient(pyr, 1, np.ones((2, 2)))
        assert lifted[0, 0] == 0.0
        assert lifted[0, 1] == pytest.approx(1.0 / 3.0)
