"""Rigid-body transforms with a 6-parameter axis-angle chart.

A Pose maps points of frame t into frame t-1 coordinates: q' = R q + t.
Callers never need to double-invert: the pose passed around the library
is always the point transform itself, not "the camera's movement".

The 6-vector layout is (wx, wy, wz, tx, ty, tz): axis-angle rotation in
radians followed by translation in scene units. The chart is canonical
for rotation angles below pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import PointCloud

_ORTHO_TOL = 1e-9


class ChartBoundaryError(ValueError):
    """Rotation angle at or beyond pi: outside the canonical axis-angle chart."""


def skew(w: np.ndarray) -> np.ndarray:
    wx, wy, wz = w
    return np.array(
        [
            [0.0, -wz, wy],
            [wz, 0.0, -wx],
            [-wy, wx, 0.0],
        ]
    )


def rotation_from_axis_angle(w: np.ndarray) -> np.ndarray:
    """Rodrigues' formula; exact Taylor fallback near zero angle."""
    w = np.asarray(w, dtype=np.float64)
    theta = np.linalg.norm(w)
    big_k = skew(w)
    if theta < 1e-10:
        # second-order expansion keeps the result orthonormal to machine precision
        return np.eye(3) + big_k + 0.5 * (big_k @ big_k)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * big_k + b * (big_k @ big_k)


def axis_angle_from_rotation(r: np.ndarray) -> np.ndarray:
    """Inverse of Rodrigues' formula on the open chart (angle < pi)."""
    trace = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(trace)
    if theta >= np.pi - 1e-9:
        raise ChartBoundaryError(f"rotation angle {theta} at the chart boundary pi")
    if theta < 1e-10:
        # R ~ I + [w]x; read the vector off the antisymmetric part
        return np.array(
            [r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]
        ) / 2.0
    axis = np.array(
        [r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]
    ) / (2.0 * np.sin(theta))
    return theta * axis


def rotation_jacobian(w: np.ndarray) -> np.ndarray:
    """d(R p)/dw as a function builder: returns (3, 3, 3) with J[k] = dR/dw_k.

    Uses the closed form of Gallego & Yezzi for the derivative of the
    exponential map; at w = 0 this reduces to dR/dw_k = skew(e_k).
    """
    w = np.asarray(w, dtype=np.float64)
    theta2 = float(w @ w)
    r = rotation_from_axis_angle(w)
    out = np.empty((3, 3, 3))
    if theta2 < 1e-16:
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1.0
            out[k] = skew(e)
        return out
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        out[k] = (w[k] * skew(w) + skew(np.cross(w, (np.eye(3) - r) @ e))) @ r / theta2
    return out


@dataclass(frozen=True)
class Pose:
    """Rigid transform q -> R q + t with an orthonormal, det +1 rotation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-7:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-7:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    @property
    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @property
    def matrix_3x4(self) -> np.ndarray:
        return np.hstack([self.rotation, self.translation[:, None]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to an (..., 3) array of points."""
        return points @ self.rotation.T + self.translation


def to_pose(v: np.ndarray) -> Pose:
    """Build a Pose from a 6-vector (axis-angle, translation)."""
    v = np.asarray(v, dtype=np.float64).reshape(6)
    angle = np.linalg.norm(v[:3])
    if angle >= np.pi:
        raise ChartBoundaryError(f"rotation angle {angle} >= pi")
    return Pose(rotation=rotation_from_axis_angle(v[:3]), translation=v[3:].copy())


def to_vector(p: Pose) -> np.ndarray:
    """6-vector (axis-angle, translation) of a Pose; error at angle pi."""
    return np.concatenate([axis_angle_from_rotation(p.rotation), p.translation])


def compose(a: Pose, b: Pose) -> Pose:
    """Transform that applies b first, then a."""
    return Pose(
        rotation=a.rotation @ b.rotation,
        translation=a.rotation @ b.translation + a.translation,
    )


def invert(p: Pose) -> Pose:
    rt = p.rotation.T
    return Pose(rotation=rt, translation=-rt @ p.translation)


def transform_cloud(p: Pose, q: PointCloud) -> PointCloud:
    """Map every valid point to R q + t; validity is preserved."""
    points = p.apply(q.points)
    points[~q.valid] = 0.0
    return PointCloud(points=points, valid=q.valid.copy())


def pose_distance(a: Pose, b: Pose) -> tuple[float, float]:
    """(rotation angle in radians, translation norm) of a^-1 b."""
    delta = compose(invert(a), b)
    trace = np.clip((np.trace(delta.rotation) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.arccos(trace)), float(np.linalg.norm(delta.translation))
