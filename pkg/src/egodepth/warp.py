"""Differentiable view synthesis and analytic validity masks.

A frame is reconstructed by pushing every pixel of the target view through
depth and ego-motion into the source view and bilinearly sampling there:

    [u, v, 1]^T = K T (D * K^-1 [i, j, 1]^T)

The mask marks pixels whose warped coordinate lands inside the source
image with the transformed point in front of the camera; masked-out pixels
carry zero intensity and zero derivatives so they never leak into losses.

Derivatives of the reconstruction with respect to each pixel's depth and
the 6 pose parameters (axis-angle + translation, evaluated at the given
pose) are produced by hand-chained rules through the bilinear weights,
the perspective division, and the rigid transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import DepthMap, DimensionMismatchError, Intrinsics, Z_MIN, backproject_rays
from .kernels import bilinear_sample_grad
from .se3 import Pose, rotation_jacobian, to_vector


@dataclass(frozen=True)
class Image:
    """H x W x C intensity grid, C in {1, 3}, values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError(f"image must be (H, W, C) with C in {{1, 3}}, got {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("image contains non-finite values")
        if data.min() < -1e-9 or data.max() > 1.0 + 1e-9:
            raise ValueError("image values must lie in [0, 1]")
        if data.min() < 0.0 or data.max() > 1.0:
            # tolerate float rounding from interpolation, but store in-range
            data = np.clip(data, 0.0, 1.0)
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple:
        return self.data.shape[:2]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def luminance(self) -> np.ndarray:
        """Single-channel (H, W) view; Rec. 601 weights for RGB."""
        if self.channels == 1:
            return self.data[:, :, 0]
        return self.data @ np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class WarpResult:
    """Reconstruction, mask, source coordinates, and analytic derivatives."""

    image: Image
    mask: np.ndarray  # (H, W) bool
    coords: np.ndarray  # (H, W, 2) continuous (col, row) into the source
    d_depth: np.ndarray  # (H, W, C) dimage/ddepth per pixel
    d_pose: np.ndarray  # (H, W, C, 6) dimage/dpose-parameter per pixel


def _warp_coords(depth: DepthMap, pose: Pose, k: Intrinsics):
    """Shared projection step: transformed points, coordinates, and mask.

    Returns (q, p, u, v, mask) where q is the back-projected cloud, p the
    transformed cloud, (u, v) the continuous source coordinates, and mask
    the analytic validity mask. principled_mask and warp both use this, so
    their masks agree bit for bit.
    """
    h, w = depth.shape
    if (w, h) != (k.width, k.height):
        raise DimensionMismatchError(
            f"depth is {w}x{h} but intrinsics expect {k.width}x{k.height}"
        )
    rays = backproject_rays(k)
    q = depth.values[:, :, None] * rays
    p = pose.apply(q)
    z = p[..., 2]
    in_front = depth.valid & (z > Z_MIN)
    safe_z = np.where(in_front, z, 1.0)
    is_identity = (pose.rotation == np.eye(3)).all() and (pose.translation == 0).all()
    if is_identity:
        # algebraically the identity mapping; bypass the K K^-1 round trip so
        # the coordinates (and the reconstruction) are bit-exact
        cols, rows = np.meshgrid(
            np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64)
        )
        u, v = cols, rows
    else:
        u = k.fx * p[..., 0] / safe_z + k.cx
        v = k.fy * p[..., 1] / safe_z + k.cy
    mask = in_front & (u >= 0.0) & (u <= w - 1.0) & (v >= 0.0) & (v <= h - 1.0)
    u = np.where(in_front, u, -1.0)
    v = np.where(in_front, v, -1.0)
    return q, p, u, v, mask


def principled_mask(depth: DepthMap, pose: Pose, k: Intrinsics) -> np.ndarray:
    """Analytic validity mask: in-bounds warped coordinate, point in front."""
    _, _, _, _, mask = _warp_coords(depth, pose, k)
    return mask


def warp(source: Image, depth: DepthMap, pose: Pose, k: Intrinsics) -> WarpResult:
    """Reconstruct the target frame by warping `source` through depth and pose."""
    h, w = depth.shape
    if source.shape != (h, w):
        raise DimensionMismatchError(
            f"source is {source.shape} but depth is {(h, w)}"
        )
    q, p, u, v, mask = _warp_coords(depth, pose, k)
    c = source.channels

    vals, dval_du, dval_dv = bilinear_sample_grad(source.data, u.ravel(), v.ravel())
    vals = vals.reshape(h, w, c)
    dval_du = dval_du.reshape(h, w, c)
    dval_dv = dval_dv.reshape(h, w, c)

    z = p[..., 2]
    safe_z = np.where(mask, z, 1.0)
    # du/dP and dv/dP rows of the projection Jacobian
    du_dp = np.stack(
        [
            k.fx / safe_z,
            np.zeros_like(safe_z),
            -k.fx * p[..., 0] / (safe_z * safe_z),
        ],
        axis=-1,
    )
    dv_dp = np.stack(
        [
            np.zeros_like(safe_z),
            k.fy / safe_z,
            -k.fy * p[..., 1] / (safe_z * safe_z),
        ],
        axis=-1,
    )

    # depth chain: dP/dd = R * ray = R q / d
    rays = backproject_rays(k)
    dp_dd = rays @ pose.rotation.T
    du_dd = np.einsum("hwk,hwk->hw", du_dp, dp_dd)
    dv_dd = np.einsum("hwk,hwk->hw", dv_dp, dp_dd)
    d_depth = dval_du * du_dd[:, :, None] + dval_dv * dv_dd[:, :, None]

    # pose chain at the given pose's axis-angle chart
    w_vec = to_vector(pose)[:3]
    dr_dw = rotation_jacobian(w_vec)  # (3, 3, 3)
    d_pose = np.empty((h, w, c, 6))
    for m in range(3):
        dp_dm = q @ dr_dw[m].T
        du_dm = np.einsum("hwk,hwk->hw", du_dp, dp_dm)
        dv_dm = np.einsum("hwk,hwk->hw", dv_dp, dp_dm)
        d_pose[:, :, :, m] = dval_du * du_dm[:, :, None] + dval_dv * dv_dm[:, :, None]
    for m in range(3):
        # translation: dP/dt_m = e_m
        du_dm = du_dp[..., m]
        dv_dm = dv_dp[..., m]
        d_pose[:, :, :, 3 + m] = (
            dval_du * du_dm[:, :, None] + dval_dv * dv_dm[:, :, None]
        )

    off = ~mask
    vals[off] = 0.0
    d_depth[off] = 0.0
    d_pose[off] = 0.0
    coords = np.stack([u, v], axis=-1)

    return WarpResult(
        image=Image(vals),
        mask=mask,
        coords=coords,
        d_depth=d_depth,
        d_pose=d_pose,
    )
