"""Rigid registration between structured point clouds and the 3D alignment
loss with approximate gradients.

ICP alternates exact nearest-neighbor correspondence (k-d tree over the
target's valid points) with a closed-form best-fit transform: Kabsch/SVD
for point-to-point, a small-angle 6x6 linearization for point-to-plane.
The returned correction, its residual field, and their translation into
approximate pose/depth gradients are what the rest of the library consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .camera import PointCloud
from .se3 import Pose, compose, invert, rotation_from_axis_angle, to_vector

MIN_VALID_POINTS = 6


class DegenerateCloudError(ValueError):
    """Too few valid points for a well-posed registration."""


class NoOverlapError(ValueError):
    """All candidate correspondences rejected by the distance gate."""


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 50
    convergence_tol: float = 1e-6
    max_correspondence_dist: float = 1.0
    distance_mode: str = "point_to_plane"
    normal_neighborhood_size: int = 16

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol <= 0 or self.max_correspondence_dist <= 0:
            raise ValueError("tolerances must be positive")
        if self.distance_mode not in ("point_to_point", "point_to_plane"):
            raise ValueError(f"unknown distance mode {self.distance_mode!r}")
        if self.normal_neighborhood_size < 3:
            raise ValueError("normal_neighborhood_size must be >= 3")


@dataclass
class IcpResult:
    """Best-fit correction, per-source-point residuals, and correspondences.

    `residuals[j, i]` is source_point - transform^-1 * matched_target_point
    for matched cells (its point-to-plane projection in that mode) and zero
    for unmatched cells. `correspondences[j, i]` is the flat row-major index
    of the matched target cell, or -1. `objective_history` records the mean
    correspondence distance after each iteration's fit.
    """

    transform: Pose
    residuals: np.ndarray  # (H, W, 3)
    correspondences: np.ndarray  # (H, W) int, -1 for none
    matched: np.ndarray  # (H, W) bool
    iterations_run: int
    converged: bool
    objective_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        matched_res = self.residuals[self.matched]
        return {
            "transform_vector": list(to_vector(self.transform)),
            "transform_matrix_3x4": [list(row) for row in self.transform.matrix_3x4],
            "iterations_run": self.iterations_run,
            "converged": self.converged,
            "num_matched": int(self.matched.sum()),
            "mean_residual_norm": float(
                np.linalg.norm(matched_res, axis=1).mean() if len(matched_res) else 0.0
            ),
            "objective_history": [float(x) for x in self.objective_history],
        }


def estimate_normals(cloud: PointCloud, k: int):
    """Per-point unit normals from the covariance of the k nearest neighbors.

    Normals are oriented toward the camera origin (n . p <= 0). Neighborhoods
    of rank < 2 yield an invalid normal. Returns (normals (H, W, 3),
    valid (H, W)).
    """
    if k < 3:
        raise ValueError(f"normal neighborhood size must be >= 3, got {k}")
    pts = cloud.valid_points()
    n = len(pts)
    if n < k:
        raise ValueError(f"cloud has {n} valid points, fewer than k={k}")

    tree = cKDTree(pts)
    _, nbr = tree.query(pts, k=k)
    if k == 1:
        nbr = nbr[:, None]
    neighborhoods = pts[nbr]  # (n, k, 3)
    centered = neighborhoods - neighborhoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    eigvals, eigvecs = np.linalg.eigh(cov)

    normals_flat = eigvecs[:, :, 0]
    # rank < 2: the two smallest eigenvalues both vanish (collinear points)
    scale = np.maximum(eigvals[:, 2], 1e-300)
    degenerate = eigvals[:, 1] <= 1e-10 * scale

    # orient toward the origin
    flip = np.einsum("ni,ni->n", normals_flat, pts) > 0
    normals_flat[flip] *= -1.0

    h, w = cloud.shape
    normals = np.zeros((h, w, 3))
    valid = np.zeros((h, w), dtype=bool)
    rows, cols = np.nonzero(cloud.valid)
    normals[rows, cols] = normals_flat
    valid[rows, cols] = ~degenerate
    normals[rows[degenerate], cols[degenerate]] = 0.0
    return normals, valid


def kabsch(a: np.ndarray, b: np.ndarray) -> Pose:
    """Closed-form rigid transform minimizing sum ||T a_i - b_i||^2."""
    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return Pose(rotation=r, translation=cb - r @ ca)


def _solve_point_to_plane(a: np.ndarray, b: np.ndarray, n: np.ndarray) -> Pose:
    """Small-angle linearized solve of sum ((R a + t - b) . n)^2."""
    e = np.einsum("ki,ki->k", a - b, n)
    jac = np.hstack([np.cross(a, n), n])  # (K, 6)
    # minimum-norm least squares: directions the geometry does not
    # constrain (e.g. sliding along a plane) get a zero update instead of
    # an arbitrarily large one
    x, _, _, _ = np.linalg.lstsq(jac, -e, rcond=1e-8)
    return Pose(rotation=rotation_from_axis_angle(x[:3]), translation=x[3:])


def icp(
    source: PointCloud, target: PointCloud, init: Pose, params: IcpParams
) -> IcpResult:
    """Register `source` onto `target`, starting from `init`.

    Returns the full transform (including `init`) that minimizes the
    correspondence distance found, plus residuals and correspondences per
    the IcpResult contract.
    """
    a_pts = source.valid_points()
    src_rows, src_cols = np.nonzero(source.valid)
    if len(a_pts) < MIN_VALID_POINTS:
        raise DegenerateCloudError(f"source has {len(a_pts)} valid points, need >= 6")

    normals_b = None
    if params.distance_mode == "point_to_plane":
        k = min(params.normal_neighborhood_size, int(target.valid.sum()))
        if k < 3:
            raise DegenerateCloudError("target too small for normal estimation")
        n_grid, n_valid = estimate_normals(target, k)
        b_mask = target.valid & n_valid
        normals_b = n_grid[b_mask]
    else:
        b_mask = target.valid
    b_pts = target.points[b_mask]
    b_flat_idx = np.flatnonzero(b_mask.ravel())
    if len(b_pts) < MIN_VALID_POINTS:
        raise DegenerateCloudError(f"target has {len(b_pts)} usable points, need >= 6")

    tree = cKDTree(b_pts)
    transform = init
    prev_transform = init
    history = []
    converged = False
    iterations = 0

    for iterations in range(1, params.max_iterations + 1):
        a_cur = transform.apply(a_pts)
        dist, j = tree.query(a_cur)
        keep = dist <= params.max_correspondence_dist
        if keep.sum() < MIN_VALID_POINTS:
            if iterations > 1:
                # a fitted step left the distance gate; fall back to the
                # last transform that still had correspondences
                transform = prev_transform
                iterations -= 1
                break
            if keep.sum() == 0:
                raise NoOverlapError(
                    "all correspondences rejected by max_correspondence_dist"
                )
            raise DegenerateCloudError(
                f"only {int(keep.sum())} correspondences survive the distance gate"
            )
        prev_transform = transform
        ak = a_cur[keep]
        bk = b_pts[j[keep]]
        if params.distance_mode == "point_to_point":
            delta = kabsch(ak, bk)
        else:
            delta = _solve_point_to_plane(ak, bk, normals_b[j[keep]])
        transform = compose(delta, transform)

        # objective over this iteration's correspondences, after the fit
        moved = delta.apply(ak)
        if params.distance_mode == "point_to_point":
            objective = float(np.linalg.norm(moved - bk, axis=1).mean())
        else:
            objective = float(
                np.abs(np.einsum("ki,ki->k", moved - bk, normals_b[j[keep]])).mean()
            )
        history.append(objective)
        if len(history) >= 2 and abs(history[-2] - history[-1]) < params.convergence_tol:
            converged = True
            break

    # final correspondences and residuals under the final transform
    a_fin = transform.apply(a_pts)
    dist, j = tree.query(a_fin)
    keep = dist <= params.max_correspondence_dist

    inv = invert(transform)
    h, w = source.shape
    residuals = np.zeros((h, w, 3))
    correspondences = np.full((h, w), -1, dtype=np.int64)
    matched = np.zeros((h, w), dtype=bool)

    kept_rows = src_rows[keep]
    kept_cols = src_cols[keep]
    b_matched = b_pts[j[keep]]
    res = a_pts[keep] - inv.apply(b_matched)
    if params.distance_mode == "point_to_plane":
        n_src = normals_b[j[keep]] @ inv.rotation.T
        res = np.einsum("ki,ki->k", res, n_src)[:, None] * n_src
    residuals[kept_rows, kept_cols] = res
    correspondences[kept_rows, kept_cols] = b_flat_idx[j[keep]]
    matched[kept_rows, kept_cols] = True

    return IcpResult(
        transform=transform,
        residuals=residuals,
        correspondences=correspondences,
        matched=matched,
        iterations_run=iterations,
        converged=converged,
        objective_history=history,
    )


def loss_3d(
    pred: PointCloud,
    obs: PointCloud,
    params: IcpParams,
    pose: Pose | None = None,
):
    """3D alignment loss with approximate gradients.

    `pred` is the ego-motion-transformed cloud; `pose` is the transform that
    produced it (identity if omitted) and defines both the chart in which
    the pose gradient is expressed and the back-rotation of residuals into
    the source camera frame.

    Returns (loss, pose_gradient (6,), depth_gradient (H, W)). The loss is
    the L1 norm of the ICP correction's 3x4 matrix minus [I|0] plus the L1
    norm of the matched residuals. A unit step along the negative pose
    gradient applies the ICP correction in full; the per-pixel depth
    gradient is the back-rotated residual projected onto the pixel's
    viewing ray.
    """
    result = icp(pred, obs, Pose.identity(), params)
    correction = result.transform

    ident = np.hstack([np.eye(3), np.zeros((3, 1))])
    loss = float(np.abs(correction.matrix_3x4 - ident).sum())
    loss += float(np.abs(result.residuals[result.matched]).sum())

    if pose is None:
        pose = Pose.identity()
    pose_grad = to_vector(pose) - to_vector(compose(correction, pose))

    # residual back into the camera frame that generated the depth
    inv_pose = invert(pose)
    q = inv_pose.apply(pred.points)
    r_cam = result.residuals @ inv_pose.rotation.T

    norms = np.linalg.norm(q, axis=2)
    safe = np.where(result.matched & (norms > 0), norms, 1.0)
    depth_grad = np.einsum("hwk,hwk->hw", r_cam, q) / safe
    depth_grad[~result.matched] = 0.0
    return loss, pose_grad, depth_grad
