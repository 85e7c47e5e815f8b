"""Depth and odometry evaluation metrics.

Depth metrics follow the standard monocular protocol: predictions are
median-scaled to the ground truth before any error is computed, so a
global scale factor on the prediction never changes a metric. Trajectory
error aligns each snippet with a similarity transform (scale + rigid)
before measuring position RMSE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import DepthMap, DimensionMismatchError
from .se3 import Pose


class EmptyEvaluationError(ValueError):
    """No valid ground-truth pixel under the cap."""


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    cap: float
    valid_pixels: int
    median_scale: float

    def to_dict(self) -> dict:
        return {
            "abs_rel": self.abs_rel,
            "sq_rel": self.sq_rel,
            "rmse": self.rmse,
            "rmse_log": self.rmse_log,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "delta3": self.delta3,
            "cap": self.cap,
            "valid_pixels": self.valid_pixels,
            "median_scale": self.median_scale,
        }

    def table(self) -> str:
        """Aligned text table mirroring the usual column order."""
        header = (
            f"{'Abs Rel':>9} {'Sq Rel':>9} {'RMSE':>9} {'RMSE log':>9} "
            f"{'d<1.25':>8} {'d<1.25^2':>9} {'d<1.25^3':>9}"
        )
        row = (
            f"{self.abs_rel:9.4f} {self.sq_rel:9.4f} {self.rmse:9.4f} "
            f"{self.rmse_log:9.4f} {self.delta1:8.4f} {self.delta2:9.4f} "
            f"{self.delta3:9.4f}"
        )
        return header + "\n" + row


@dataclass(frozen=True)
class AteResult:
    mean: float
    std: float
    num_snippets: int
    snippet_len: int

    def to_dict(self) -> dict:
        return {
            "ate_mean": self.mean,
            "ate_std": self.std,
            "num_snippets": self.num_snippets,
            "snippet_len": self.snippet_len,
        }


def depth_metrics(
    pred: DepthMap,
    gt: DepthMap,
    cap: float = 80.0,
    crop_mask: np.ndarray | None = None,
    median_scaling: bool = True,
) -> DepthMetrics:
    """Standard depth errors over pixels with valid ground truth under `cap`.

    `median_scaling=False` evaluates the prediction as-is, for callers that
    have already resolved the monocular scale ambiguity.
    """
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"pred {pred.shape} != gt {gt.shape}")
    sel = gt.valid & pred.valid & (gt.values <= cap)
    if crop_mask is not None:
        sel &= np.asarray(crop_mask, dtype=bool)
    if not sel.any():
        raise EmptyEvaluationError("no valid ground-truth pixels under the cap")

    g = gt.values[sel]
    p = pred.values[sel]
    scale = float(np.median(g) / np.median(p)) if median_scaling else 1.0
    p = p * scale

    ratio = np.maximum(p / g, g / p)
    diff = p - g
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff * diff / g)),
        rmse=float(np.sqrt(np.mean(diff * diff))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
        cap=float(cap),
        valid_pixels=int(sel.sum()),
        median_scale=scale,
    )


def similarity_align(src: np.ndarray, dst: np.ndarray):
    """Least-squares scale + rigid alignment of src onto dst (Umeyama).

    Returns (scale, rotation, translation) minimizing
    sum ||s R src_i + t - dst_i||^2.
    """
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    cs = src - mu_s
    cd = dst - mu_d
    cov = cd.T @ cs / len(src)
    u, dvals, vt = np.linalg.svd(cov)
    sign = np.sign(np.linalg.det(u @ vt))
    d = np.diag([1.0, 1.0, sign])
    r = u @ d @ vt
    var_s = (cs**2).sum() / len(src)
    if var_s < 1e-300:
        scale = 1.0
    else:
        scale = float(np.trace(np.diag(dvals) @ d) / var_s)
    t = mu_d - scale * r @ mu_s
    return scale, r, t


def ate(pred_poses, gt_poses, snippet_len: int = 3) -> AteResult:
    """Absolute trajectory error over all sliding snippets.

    Camera positions are the translation components of the given poses.
    Each snippet is aligned with scale + rigid least squares (monocular
    translation scale is free) before the position RMSE is taken.
    """
    if len(pred_poses) != len(gt_poses):
        raise ValueError(
            f"sequence lengths differ: {len(pred_poses)} vs {len(gt_poses)}"
        )
    if len(pred_poses) < snippet_len:
        raise ValueError("sequences shorter than the snippet length")
    if snippet_len < 2:
        raise ValueError("snippet_len must be >= 2")

    pred_pos = np.array([p.translation for p in pred_poses])
    gt_pos = np.array([p.translation for p in gt_poses])

    errors = []
    for start in range(len(pred_poses) - snippet_len + 1):
        ps = pred_pos[start : start + snippet_len]
        gs = gt_pos[start : start + snippet_len]
        scale, r, t = similarity_align(ps, gs)
        aligned = scale * ps @ r.T + t
        errors.append(float(np.sqrt(np.mean(np.sum((aligned - gs) ** 2, axis=1)))))
    errors = np.array(errors)
    return AteResult(
        mean=float(errors.mean()),
        std=float(errors.std()),
        num_snippets=len(errors),
        snippet_len=snippet_len,
    )
