"""File formats: PFM and 16-bit PNG depth, PNG/PPM images, 1-bit PNG masks,
ASCII PLY point clouds, JSON intrinsics/poses, KITTI trajectory text.

Depth PNGs use the KITTI fixed-point convention: stored value / 256.0 is
meters, zero marks an invalid pixel.
"""

from __future__ import annotations

import json
import struct

import numpy as np
from PIL import Image as PilImage

from .camera import DepthMap, Intrinsics, PointCloud
from .se3 import Pose, to_pose, to_vector
from .warp import Image

DEPTH_PNG_SCALE = 256.0


# ---------------------------------------------------------------- JSON

def format_float(x: float) -> str:
    """Fixed 17-significant-digit formatting for deterministic output."""
    return format(float(x), ".17g")


def dumps_canonical(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, fixed float formatting."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = ", ".join(
            f"{json.dumps(str(k))}: {dumps_canonical(v)}" for k, v in sorted(obj.items())
        )
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps_canonical(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, np.ndarray):
        return dumps_canonical(obj.tolist())
    return json.dumps(obj)


def write_json(path, obj):
    with open(path, "w") as f:
        f.write(dumps_canonical(obj))
        f.write("\n")


# ---------------------------------------------------------------- PFM

def read_pfm(path):
    """Read a PFM file; returns (array, scale). Grayscale gives (H, W)."""
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise ValueError(f"{path}: not a PFM file (header {header!r})")
        dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        little_endian = scale < 0
        fmt = "<" if little_endian else ">"
        count = w * h * channels
        data = np.frombuffer(f.read(count * 4), dtype=fmt + "f4", count=count)
    data = data.reshape(h, w, channels) if channels == 3 else data.reshape(h, w)
    # PFM stores rows bottom-to-top
    return np.flipud(data).astype(np.float64).copy(), abs(scale)


def write_pfm(path, array: np.ndarray, scale: float = 1.0):
    """Write little-endian PFM, preserving the given scale field."""
    array = np.asarray(array, dtype=np.float32)
    if array.ndim == 2:
        header = b"Pf"
    elif array.ndim == 3 and array.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM supports (H, W) or (H, W, 3), got {array.shape}")
    h, w = array.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(f"{-abs(scale)}\n".encode())
        f.write(np.flipud(array).astype("<f4").tobytes())


def write_depth_pfm(path, depth: DepthMap):
    """Invalid pixels are stored as zero."""
    write_pfm(path, np.where(depth.valid, depth.values, 0.0))


def read_depth_pfm(path) -> DepthMap:
    data, _ = read_pfm(path)
    valid = data > 0
    return DepthMap(values=np.where(valid, data, 1.0), valid=valid)


# ---------------------------------------------------------------- PNG / PPM

def write_depth_png(path, depth: DepthMap):
    """16-bit PNG, value = meters * 256 (KITTI convention), zero invalid."""
    vals = np.where(depth.valid, depth.values * DEPTH_PNG_SCALE, 0.0)
    vals = np.clip(np.round(vals), 0, 65535).astype(np.uint16)
    PilImage.fromarray(vals).save(path)


def read_depth_png(path) -> DepthMap:
    raw = np.array(PilImage.open(path), dtype=np.uint16)
    valid = raw > 0
    vals = raw.astype(np.float64) / DEPTH_PNG_SCALE
    return DepthMap(values=np.where(valid, vals, 1.0), valid=valid)


def write_image_png(path, image: Image):
    data = np.clip(np.round(image.data * 255.0), 0, 255).astype(np.uint8)
    if data.shape[2] == 1:
        PilImage.fromarray(data[:, :, 0], mode="L").save(path)
    else:
        PilImage.fromarray(data, mode="RGB").save(path)


def read_image_png(path) -> Image:
    img = PilImage.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    data = np.asarray(img, dtype=np.float64) / 255.0
    return Image(data)


def write_image_ppm(path, image: Image):
    data = np.clip(np.round(image.data * 255.0), 0, 255).astype(np.uint8)
    if data.shape[2] == 1:
        data = np.repeat(data, 3, axis=2)
    h, w, _ = data.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(data.tobytes())


def read_image_ppm(path) -> Image:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P6":
            raise ValueError(f"{path}: not a binary PPM (magic {magic!r})")
        fields = []
        while len(fields) < 3:
            line = f.readline()
            if line.startswith(b"#"):
                continue
            fields.extend(line.split())
        w, h, maxval = (int(x) for x in fields)
        data = np.frombuffer(f.read(w * h * 3), dtype=np.uint8).reshape(h, w, 3)
    return Image(data.astype(np.float64) / maxval)


def write_mask_png(path, mask: np.ndarray):
    PilImage.fromarray(np.asarray(mask, dtype=bool)).convert("1").save(path)


def read_mask_png(path) -> np.ndarray:
    return np.array(PilImage.open(path).convert("1"), dtype=bool)


# ---------------------------------------------------------------- PLY

def write_ply(path, cloud: PointCloud, normals: np.ndarray | None = None):
    """ASCII PLY of the valid points: x y z [nx ny nz]."""
    pts = cloud.valid_points()
    with_normals = normals is not None
    if with_normals:
        nrm = np.asarray(normals, dtype=np.float64)[cloud.valid]
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(pts)}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        if with_normals:
            f.write("property float nx\nproperty float ny\nproperty float nz\n")
        f.write("end_header\n")
        for idx, p in enumerate(pts):
            row = list(p) + (list(nrm[idx]) if with_normals else [])
            f.write(" ".join(format_float(v) for v in row) + "\n")


def read_ply(path):
    """Read ASCII PLY; returns (PointCloud of shape (1, N), normals or None).

    The grid structure of an exported cloud is not preserved; points come
    back as a single row.
    """
    with open(path) as f:
        if f.readline().strip() != "ply":
            raise ValueError(f"{path}: not a PLY file")
        n_vertex = None
        props = []
        while True:
            line = f.readline()
            if not line:
                raise ValueError(f"{path}: unterminated PLY header")
            line = line.strip()
            if line.startswith("element vertex"):
                n_vertex = int(line.split()[-1])
            elif line.startswith("property"):
                props.append(line.split()[-1])
            elif line == "end_header":
                break
        if n_vertex is None:
            raise ValueError(f"{path}: missing vertex element")
        rows = [
            [float(x) for x in f.readline().split()] for _ in range(n_vertex)
        ]
    data = np.array(rows, dtype=np.float64).reshape(n_vertex, len(props))
    has_normals = {"nx", "ny", "nz"} <= set(props)
    xyz = data[:, [props.index("x"), props.index("y"), props.index("z")]]
    cloud = PointCloud(points=xyz.reshape(1, n_vertex, 3))
    normals = None
    if has_normals:
        normals = data[
            :, [props.index("nx"), props.index("ny"), props.index("nz")]
        ].reshape(1, n_vertex, 3)
    return cloud, normals


# ---------------------------------------------------------------- poses

def write_pose_json(path, pose: Pose):
    write_json(
        path,
        {
            "vector": list(to_vector(pose)),
            "matrix_3x4": [list(row) for row in pose.matrix_3x4],
        },
    )


def read_pose_json(path) -> Pose:
    with open(path) as f:
        d = json.load(f)
    return to_pose(np.array(d["vector"], dtype=np.float64))


def write_trajectory_kitti(path, poses):
    """KITTI odometry text format: 12 floats (row-major 3x4) per line."""
    with open(path, "w") as f:
        for p in poses:
            f.write(" ".join(format_float(v) for v in p.matrix_3x4.ravel()) + "\n")


def read_trajectory_kitti(path):
    poses = []
    with open(path) as f:
        for line in f:
            vals = [float(x) for x in line.split()]
            if not vals:
                continue
            if len(vals) != 12:
                raise ValueError(f"{path}: expected 12 floats per line, got {len(vals)}")
            m = np.array(vals).reshape(3, 4)
            poses.append(Pose(rotation=m[:, :3], translation=m[:, 3]))
    return poses


def write_intrinsics_json(path, k: Intrinsics):
    write_json(path, k.to_dict())


def read_intrinsics_json(path) -> Intrinsics:
    with open(path) as f:
        return Intrinsics.from_dict(json.load(f))
