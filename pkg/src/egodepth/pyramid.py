"""Multi-scale pyramids: 2x2 average pooling of images and depths, with
intrinsics rescaled to match each level.

Depth pooling averages over the valid pixels of each 2x2 cell; a cell with
no valid pixel becomes invalid. Validity masks for warping are recomputed
per level from the level's depth and pose, never downsampled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import DepthMap, Intrinsics
from .warp import Image


@dataclass(frozen=True)
class PyramidLevel:
    image: Image
    depth: DepthMap
    intrinsics: Intrinsics


@dataclass(frozen=True)
class Pyramid:
    levels: tuple


def _pool_image(data: np.ndarray) -> np.ndarray:
    h, w, c = data.shape
    return data.reshape(h // 2, 2, w // 2, 2, c).mean(axis=(1, 3))


def _pool_depth(values: np.ndarray, valid: np.ndarray):
    h, w = values.shape
    vals = np.where(valid, values, 0.0).reshape(h // 2, 2, w // 2, 2)
    counts = valid.reshape(h // 2, 2, w // 2, 2).sum(axis=(1, 3))
    pooled_valid = counts > 0
    safe = np.maximum(counts, 1)
    pooled = vals.sum(axis=(1, 3)) / safe
    pooled[~pooled_valid] = 0.0
    return pooled, pooled_valid


def build_pyramid(
    image: Image, depth: DepthMap, k: Intrinsics, num_levels: int = 4
) -> Pyramid:
    """Build `num_levels` levels at scales 1, 1/2, 1/4, ... .

    Input dimensions must be divisible by 2^(num_levels-1) so that every
    level halves exactly (divisible by 8 for the default four levels).
    """
    if not 1 <= num_levels <= 4:
        raise ValueError(f"num_levels must be in 1..4, got {num_levels}")
    h, w = depth.shape
    if image.shape != (h, w):
        raise ValueError(f"image shape {image.shape} != depth shape {(h, w)}")
    div = 2 ** (num_levels - 1)
    if h % div or w % div:
        raise ValueError(
            f"dimensions {w}x{h} not divisible by {div} for {num_levels} levels"
        )

    levels = [PyramidLevel(image=image, depth=depth, intrinsics=k)]
    for s in range(1, num_levels):
        prev = levels[-1]
        img = Image(_pool_image(prev.image.data))
        dvals, dvalid = _pool_depth(prev.depth.values, prev.depth.valid)
        levels.append(
            PyramidLevel(
                image=img,
                depth=DepthMap(values=dvals, valid=dvalid),
                intrinsics=prev.intrinsics.scaled(0.5),
            )
        )
    return Pyramid(levels=tuple(levels))


def lift_depth_gradient(pyr: Pyramid, level: int, grad: np.ndarray) -> np.ndarray:
    """Adjoint of the depth pooling chain: lift a level-`level` gradient to
    the full-resolution grid, honoring per-cell valid counts."""
    g = np.asarray(grad, dtype=np.float64)
    for s in range(level, 0, -1):
        fine_valid = pyr.levels[s - 1].depth.valid
        h, w = fine_valid.shape
        counts = fine_valid.reshape(h // 2, 2, w // 2, 2).sum(axis=(1, 3))
        safe = np.maximum(counts, 1)
        per_cell = g / safe
        fine = np.repeat(np.repeat(per_cell, 2, axis=0), 2, axis=1)
        fine[~fine_valid] = 0.0
        g = fine
    return g
