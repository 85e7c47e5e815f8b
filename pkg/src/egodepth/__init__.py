"""Differentiable geometric machinery for unsupervised depth and ego-motion:
back-projection, ego-motion warping, principled masks, ICP with approximate
gradients, photometric/SSIM/smoothness losses, synthetic oracles, and a
direct gradient-descent driver.
"""

from .camera import DepthMap, Intrinsics, PointCloud, backproject, project
from .icp import IcpParams, IcpResult, estimate_normals, icp, loss_3d
from .kernels import BACKEND as KERNEL_BACKEND
from .losses import (
    LossBreakdown,
    LossWeights,
    SsimParams,
    reconstruction_loss,
    smoothness_loss,
    ssim_loss,
    total_loss,
)
from .metrics import AteResult, DepthMetrics, ate, depth_metrics
from .optimize import OptimConfig, OptimState, ablate, optimize_pair
from .pyramid import Pyramid, build_pyramid
from .se3 import Pose, compose, invert, to_pose, to_vector, transform_cloud
from .synth import FramePair, Scene, make_pair, render
from .warp import Image, WarpResult, principled_mask, warp

__version__ = "0.1.0"

__all__ = [
    "AteResult",
    "DepthMap",
    "DepthMetrics",
    "FramePair",
    "IcpParams",
    "IcpResult",
    "Image",
    "Intrinsics",
    "KERNEL_BACKEND",
    "LossBreakdown",
    "LossWeights",
    "OptimConfig",
    "OptimState",
    "PointCloud",
    "Pose",
    "Pyramid",
    "Scene",
    "SsimParams",
    "WarpResult",
    "ablate",
    "ate",
    "backproject",
    "build_pyramid",
    "compose",
    "depth_metrics",
    "estimate_normals",
    "icp",
    "invert",
    "loss_3d",
    "make_pair",
    "optimize_pair",
    "principled_mask",
    "project",
    "reconstruction_loss",
    "render",
    "smoothness_loss",
    "ssim_loss",
    "to_pose",
    "to_vector",
    "total_loss",
    "transform_cloud",
    "warp",
]
