"""Synthetic scene oracle: analytic ray-traced frame pairs with exactly
known depth and ego-motion.

Intensity is a smooth band-limited function of the 3D hit point (sums of
sinusoids, seeded), evaluated identically from any viewpoint, so
photometric consistency holds exactly and bilinear resampling is the only
source of reconstruction error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .camera import DepthMap, Intrinsics, backproject_rays
from .se3 import Pose, invert, to_pose, to_vector
from .warp import Image


@dataclass(frozen=True)
class Plane:
    """Infinite plane through `point` with normal `normal`."""

    point: tuple
    normal: tuple

    def intersect(self, origins, dirs):
        n = np.asarray(self.normal, dtype=np.float64)
        p0 = np.asarray(self.point, dtype=np.float64)
        denom = dirs @ n
        num = (p0 - origins) @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            s = num / denom
        s = np.where(np.abs(denom) > 1e-12, s, np.inf)
        return np.where(s > 1e-9, s, np.inf)


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def intersect(self, origins, dirs):
        c = np.asarray(self.center, dtype=np.float64)
        oc = origins - c
        a = np.einsum("...i,...i->...", dirs, dirs)
        b = 2.0 * np.einsum("...i,...i->...", oc, dirs)
        cc = np.einsum("...i,...i->...", oc, oc) - self.radius**2
        disc = b * b - 4.0 * a * cc
        sqrt_disc = np.sqrt(np.maximum(disc, 0.0))
        s0 = (-b - sqrt_disc) / (2.0 * a)
        s1 = (-b + sqrt_disc) / (2.0 * a)
        s = np.where(s0 > 1e-9, s0, s1)
        return np.where((disc >= 0.0) & (s > 1e-9), s, np.inf)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by opposite corners."""

    lo: tuple
    hi: tuple

    def intersect(self, origins, dirs):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
        t0 = (lo - origins) * inv
        t1 = (hi - origins) * inv
        tmin = np.minimum(t0, t1).max(axis=-1)
        tmax = np.maximum(t0, t1).min(axis=-1)
        hit = (tmax >= tmin) & (tmax > 1e-9)
        s = np.where(tmin > 1e-9, tmin, tmax)
        return np.where(hit & (s > 1e-9), s, np.inf)


_PRIMITIVES = {"plane": Plane, "sphere": Sphere, "box": Box}


@dataclass(frozen=True)
class Texture:
    """Smooth procedural texture over 3D points.

    Two ingredients, both band limited:
      - a linear ramp `ramp . p`, which is reproduced exactly by bilinear
        resampling wherever the view-to-view pixel mapping is affine
        (fronto-parallel geometry under translation), and
      - seeded sinusoids at `frequency` cycles per scene unit, whose
        bilinear resampling error scales with (frequency * pixel size)^2.

    Amplitudes are budgeted so intensity stays inside [0, 1] without
    clipping over `extent` scene units around the origin.
    """

    seed: int = 0
    num_waves: int = 6
    frequency: float = 1.0
    amplitude: float = 0.3
    ramp: tuple = (0.0, 0.0, 0.0)
    extent: float = 4.0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        ramp = np.asarray(self.ramp, dtype=np.float64)
        out = np.full(points.shape[:-1], 0.5)
        ramp_span = float(np.abs(ramp).sum()) * self.extent
        if ramp_span > 0:
            out = out + (points @ ramp) * min(1.0, 0.45 / ramp_span)
        if self.amplitude > 0 and self.num_waves > 0:
            rng = np.random.default_rng(self.seed)
            dirs = rng.normal(size=(self.num_waves, 3))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            freqs = self.frequency * rng.uniform(0.5, 1.5, size=self.num_waves)
            phases = rng.uniform(0.0, 2.0 * np.pi, size=self.num_waves)
            amps = rng.uniform(0.5, 1.0, size=self.num_waves)
            amps *= min(self.amplitude, 0.45 - min(0.45, ramp_span)) / amps.sum()
            for k in range(self.num_waves):
                out = out + amps[k] * np.sin(
                    2.0 * np.pi * freqs[k] * (points @ dirs[k]) + phases[k]
                )
        return out


@dataclass(frozen=True)
class Scene:
    primitives: tuple
    texture: Texture = Texture()

    def __post_init__(self):
        if not self.primitives:
            raise ValueError("scene must contain at least one primitive")

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        prims = []
        for spec in d["primitives"]:
            kind = spec["type"]
            if kind not in _PRIMITIVES:
                raise ValueError(f"unknown primitive type {kind!r}")
            args = {k: v for k, v in spec.items() if k != "type"}
            args = {k: tuple(v) if isinstance(v, list) else v for k, v in args.items()}
            prims.append(_PRIMITIVES[kind](**args))
        tex = Texture(**d.get("texture", {}))
        return cls(primitives=tuple(prims), texture=tex)

    @classmethod
    def from_json(cls, path) -> "Scene":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class FramePair:
    """Everything needed to evaluate all losses at the ground truth."""

    image_tm1: Image
    image_t: Image
    depth_tm1: DepthMap
    depth_t: DepthMap
    pose: Pose  # frame-t -> frame-(t-1) point transform
    intrinsics: Intrinsics


def render(scene: Scene, pose: Pose, k: Intrinsics):
    """Render from a camera with world-to-camera transform `pose`.

    Per pixel, the nearest analytic ray hit gives exact depth; intensity is
    the scene texture at the hit point. Pixels whose ray misses everything
    are invalid in the depth map and black in the image.
    """
    rays_cam = backproject_rays(k)  # (H, W, 3), z component 1
    cam_to_world = invert(pose)
    origin = cam_to_world.translation
    dirs = rays_cam @ cam_to_world.rotation.T

    origins = np.broadcast_to(origin, dirs.shape)
    depth = np.full(dirs.shape[:2], np.inf)
    for prim in scene.primitives:
        depth = np.minimum(depth, prim.intersect(origins, dirs))

    valid = np.isfinite(depth)
    # ray parameter equals camera z because rays_cam has unit z
    safe_depth = np.where(valid, depth, 1.0)
    hits = origins + safe_depth[:, :, None] * dirs
    intensity = np.clip(scene.texture.evaluate(hits), 0.0, 1.0)
    intensity[~valid] = 0.0

    return (
        Image(intensity[:, :, None]),
        DepthMap(values=np.where(valid, safe_depth, 0.0) + (~valid), valid=valid),
    )


def make_pair(scene: Scene, ego: Pose, k: Intrinsics) -> FramePair:
    """Render frames t and t-1 related by the ego-motion point transform.

    Frame t's camera defines the world frame; a point with frame-t
    coordinates q has frame-(t-1) coordinates ego * q, so frame t-1 is
    rendered with world-to-camera transform `ego`.
    """
    image_t, depth_t = render(scene, Pose.identity(), k)
    image_tm1, depth_tm1 = render(scene, ego, k)
    return FramePair(
        image_tm1=image_tm1,
        image_t=image_t,
        depth_tm1=depth_tm1,
        depth_t=depth_t,
        pose=ego,
        intrinsics=k,
    )


def default_scene(seed: int = 0) -> Scene:
    """Fronto-parallel ramp-textured plane; the workhorse test scene."""
    return Scene(
        primitives=(Plane(point=(0.0, 0.0, 2.0), normal=(0.0, 0.0, -1.0)),),
        texture=Texture(seed=seed, amplitude=0.0, ramp=(0.6, 0.35, 0.0)),
    )


def builtin_scenes(seed: int = 0) -> dict:
    """The shipped scenes: all satisfy the zero-loss-at-truth oracle.

    plane:        constant-depth plane with a linear ramp texture
    plane_waves:  constant-depth plane with very low-frequency sinusoids
    plane_lowtex: constant-depth plane with a barely visible texture, for
                  probing geometry-driven losses where photometric signal
                  is weak
    """
    prim = (Plane(point=(0.0, 0.0, 2.0), normal=(0.0, 0.0, -1.0)),)
    return {
        "plane": default_scene(seed),
        "plane_waves": Scene(
            primitives=prim,
            texture=Texture(seed=seed, num_waves=6, frequency=1e-4, amplitude=0.45),
        ),
        "plane_lowtex": Scene(
            primitives=prim,
            texture=Texture(seed=seed, num_waves=6, frequency=0.02, amplitude=5e-5),
        ),
    }
