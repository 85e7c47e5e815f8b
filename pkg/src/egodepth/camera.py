"""Pinhole camera model: back-projection of depth maps and projection of clouds.

Pixel convention: pixel (i, j) denotes column i, row j, at integer
coordinates (no half-pixel offset). Homogeneous pixel coordinates are
[i, j, 1]^T, i.e. x = column, y = row. Arrays are indexed [row, col].
The camera looks along +z; a point is in front of the camera iff z > Z_MIN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Behind-camera threshold (scene units). Points with z <= Z_MIN are flagged
# invalid instead of being divided through.
Z_MIN = 1e-6


class DimensionMismatchError(ValueError):
    """Grid shapes disagree with each other or with the intrinsics."""


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 2 or self.height < 2:
            raise ValueError(f"image size must be at least 2x2, got {self.width}x{self.height}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.fx, 0.0, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def scaled(self, factor: float) -> "Intrinsics":
        """Intrinsics for the same camera at a resized image."""
        return Intrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Intrinsics":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth on an H x W grid with an explicit validity flag.

    Invalid pixels (e.g. holes in sparse ground truth) are flagged rather
    than encoded as sentinel values. Valid depths are strictly positive
    and finite.
    """

    values: np.ndarray
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"depth values must be 2-D, got shape {values.shape}")
        valid = self.valid
        if valid is None:
            valid = np.ones(values.shape, dtype=bool)
        else:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != values.shape:
                raise DimensionMismatchError(
                    f"validity shape {valid.shape} != depth shape {values.shape}"
                )
        bad = valid & ~(np.isfinite(values) & (values > 0))
        if bad.any():
            raise ValueError("valid depth values must be strictly positive and finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class PointCloud:
    """Structured point cloud: cell (row, col) corresponds to that pixel."""

    points: np.ndarray  # (H, W, 3)
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 3 or points.shape[2] != 3:
            raise ValueError(f"points must have shape (H, W, 3), got {points.shape}")
        valid = self.valid
        if valid is None:
            valid = np.ones(points.shape[:2], dtype=bool)
        else:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != points.shape[:2]:
                raise DimensionMismatchError(
                    f"validity shape {valid.shape} != grid shape {points.shape[:2]}"
                )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self) -> tuple:
        return self.points.shape[:2]

    def valid_points(self) -> np.ndarray:
        """Valid points as a flat (N, 3) array, row-major grid order."""
        return self.points[self.valid]


def pixel_grid(k: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Column and row coordinate grids, each (H, W)."""
    cols, rows = np.meshgrid(
        np.arange(k.width, dtype=np.float64),
        np.arange(k.height, dtype=np.float64),
    )
    return cols, rows


def backproject(depth: DepthMap, k: Intrinsics) -> PointCloud:
    """Lift a depth map into a structured point cloud: D * K^-1 [i, j, 1]^T."""
    h, w = depth.shape
    if (w, h) != (k.width, k.height):
        raise DimensionMismatchError(
            f"depth is {w}x{h} but intrinsics expect {k.width}x{k.height}"
        )
    cols, rows = pixel_grid(k)
    d = depth.values
    x = d * (cols - k.cx) / k.fx
    y = d * (rows - k.cy) / k.fy
    points = np.stack([x, y, d], axis=-1)
    points[~depth.valid] = 0.0
    return PointCloud(points=points, valid=depth.valid.copy())


def backproject_rays(k: Intrinsics) -> np.ndarray:
    """Unit-depth rays K^-1 [i, j, 1]^T for every pixel, shape (H, W, 3)."""
    cols, rows = pixel_grid(k)
    return np.stack(
        [
            (cols - k.cx) / k.fx,
            (rows - k.cy) / k.fy,
            np.ones_like(cols),
        ],
        axis=-1,
    )


def project(cloud: PointCloud, k: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Project a cloud onto continuous pixel coordinates.

    Returns (coords, in_front) where coords has shape (H, W, 2) holding
    (col, row) per cell and in_front flags cells whose point is a valid
    cell with z > Z_MIN. Behind-camera points get coordinate (0, 0) and
    in_front False; no division by a degenerate z is performed.
    """
    p = cloud.points
    z = p[..., 2]
    in_front = cloud.valid & (z > Z_MIN)
    safe_z = np.where(in_front, z, 1.0)
    u = k.fx * p[..., 0] / safe_z + k.cx
    v = k.fy * p[..., 1] / safe_z + k.cy
    coords = np.stack([u, v], axis=-1)
    coords[~in_front] = 0.0
    return coords, in_front
