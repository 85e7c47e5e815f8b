"""Command-line surface: render synthetic scenes, run warps/ICP/losses,
optimize frame pairs, and evaluate depth/odometry metrics.

Exit codes: 0 success, 1 domain or input errors, 2 usage errors. All
numeric JSON output uses fixed 17-significant-digit floats, so identical
arguments and seed produce byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io as eio
from .camera import DepthMap, Intrinsics
from .icp import IcpParams, icp as run_icp
from .losses import LossWeights, total_loss
from .metrics import ate, depth_metrics
from .optimize import OptimConfig, OptimState, ablate, optimize_pair
from .se3 import Pose, to_pose, to_vector
from .synth import FramePair, Scene, builtin_scenes, make_pair

DEFAULT_INTRINSICS = Intrinsics(
    fx=100.0, fy=100.0, cx=31.5, cy=31.5, width=64, height=64
)


class CliError(Exception):
    """Domain-level failure; maps to exit code 1."""


def _parse_vec6(text: str) -> np.ndarray:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 6:
        raise CliError(f"expected 6 numbers for a pose vector, got {len(parts)}")
    return np.array([float(p) for p in parts])


def _load_intrinsics(args) -> Intrinsics:
    if getattr(args, "intrinsics", None):
        return eio.read_intrinsics_json(_checked(args.intrinsics))
    return DEFAULT_INTRINSICS


def _checked(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"cannot read input: {p}")
    return p


def _load_scene(spec: str, seed: int) -> Scene:
    scenes = builtin_scenes(seed)
    if spec in scenes:
        return scenes[spec]
    return Scene.from_json(_checked(spec))


def _load_depth(path) -> DepthMap:
    p = _checked(path)
    if p.suffix.lower() == ".png":
        return eio.read_depth_png(p)
    return eio.read_depth_pfm(p)


def _load_pair(args) -> FramePair:
    """Frame pair from a scene + ego (synthetic) or from explicit files."""
    k = _load_intrinsics(args)
    if args.scene:
        ego = to_pose(_parse_vec6(args.ego)) if args.ego else Pose.identity()
        return make_pair(_load_scene(args.scene, args.seed), ego, k)
    needed = (args.image_t, args.image_tm1, args.depth_t, args.depth_tm1, args.pose)
    if any(x is None for x in needed):
        raise CliError(
            "either --scene or all of --image-t/--image-tm1/--depth-t/"
            "--depth-tm1/--pose are required"
        )
    return FramePair(
        image_tm1=eio.read_image_png(_checked(args.image_tm1)),
        image_t=eio.read_image_png(_checked(args.image_t)),
        depth_tm1=_load_depth(args.depth_tm1),
        depth_t=_load_depth(args.depth_t),
        pose=eio.read_pose_json(_checked(args.pose)),
        intrinsics=k,
    )


def _add_pair_args(p):
    p.add_argument("--scene", help="scene JSON file or builtin name")
    p.add_argument("--ego", help="ego-motion 6-vector 'wx,wy,wz,tx,ty,tz'")
    p.add_argument("--image-t", help="frame t image (PNG)")
    p.add_argument("--image-tm1", help="frame t-1 image (PNG)")
    p.add_argument("--depth-t", help="frame t depth (PFM or 16-bit PNG)")
    p.add_argument("--depth-tm1", help="frame t-1 depth (PFM or 16-bit PNG)")
    p.add_argument("--pose", help="pose JSON file")
    p.add_argument("--intrinsics", help="intrinsics JSON file")


def _add_weight_args(p):
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--omega", type=float, default=0.15)
    p.add_argument("--scales", type=int, default=4)
    p.add_argument("--normalize", action="store_true")


def _icp_params(args) -> IcpParams:
    return IcpParams(
        max_iterations=args.icp_iterations,
        convergence_tol=args.icp_tol,
        max_correspondence_dist=args.icp_max_dist,
        distance_mode=args.icp_mode,
        normal_neighborhood_size=args.icp_normals_k,
    )


def _add_icp_args(p):
    p.add_argument("--icp-iterations", type=int, default=50)
    p.add_argument("--icp-tol", type=float, default=1e-6)
    p.add_argument("--icp-max-dist", type=float, default=1.0)
    p.add_argument(
        "--icp-mode",
        choices=["point_to_point", "point_to_plane"],
        default="point_to_plane",
    )
    p.add_argument("--icp-normals-k", type=int, default=16)


def cmd_synth(args) -> int:
    k = _load_intrinsics(args)
    scene = _load_scene(args.scene, args.seed)
    ego = to_pose(_parse_vec6(args.ego)) if args.ego else Pose.identity()
    pair = make_pair(scene, ego, k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    eio.write_image_png(out / "frame_t.png", pair.image_t)
    eio.write_image_png(out / "frame_tm1.png", pair.image_tm1)
    eio.write_depth_pfm(out / "depth_t.pfm", pair.depth_t)
    eio.write_depth_pfm(out / "depth_tm1.pfm", pair.depth_tm1)
    eio.write_pose_json(out / "pose.json", pair.pose)
    eio.write_intrinsics_json(out / "intrinsics.json", k)
    if args.verbose:
        print(f"wrote synthetic pair to {out}")
    return 0


def cmd_warp(args) -> int:
    from .warp import warp

    pair = _load_pair(args)
    result = warp(pair.image_tm1, pair.depth_t, pair.pose, pair.intrinsics)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    eio.write_image_png(out / "reconstruction.png", result.image)
    eio.write_mask_png(out / "mask.png", result.mask)
    masked_err = np.abs(result.image.data - pair.image_t.data)[result.mask]
    eio.write_json(
        out / "warp.json",
        {
            "mask_fraction": float(result.mask.mean()),
            "masked_mean_abs_error": float(masked_err.mean()) if masked_err.size else 0.0,
            "masked_max_abs_error": float(masked_err.max()) if masked_err.size else 0.0,
        },
    )
    return 0


def cmd_icp(args) -> int:
    source, _ = eio.read_ply(_checked(args.source))
    if args.self_register:
        target = source
    else:
        if not args.target:
            raise CliError("--target is required unless --self is given")
        target, _ = eio.read_ply(_checked(args.target))
    init = (
        eio.read_pose_json(_checked(args.init)) if args.init else Pose.identity()
    )
    result = run_icp(source, target, init, _icp_params(args))
    eio.write_json(args.out, result.to_dict())
    return 0


def cmd_loss(args) -> int:
    pair = _load_pair(args)
    breakdown = total_loss(
        frames=(pair.image_tm1, pair.image_t),
        depths=(pair.depth_tm1, pair.depth_t),
        pose=pair.pose,
        k=pair.intrinsics,
        weights=LossWeights(args.alpha, args.beta, args.gamma, args.omega),
        scales=args.scales,
        icp_params=_icp_params(args),
        normalize=args.normalize,
    )
    eio.write_json(args.out, breakdown.to_dict())
    return 0


def _write_trace_outputs(out: Path, trace, final_state, valid):
    eio.write_json(out / "trace.json", trace)
    with open(out / "loss_curve.csv", "w") as f:
        f.write("iteration,total,reconstruction,3d,smoothness,ssim\n")
        for row in trace:
            f.write(
                f"{row['iteration']},{eio.format_float(row['total'])},"
                + ",".join(
                    eio.format_float(row["terms"][n])
                    for n in ("reconstruction", "3d", "smoothness", "ssim")
                )
                + "\n"
            )
    with open(out / "plot_loss.gp", "w") as f:
        f.write(
            "set datafile separator ','\n"
            "set key autotitle columnhead\n"
            "set logscale y\n"
            "set xlabel 'iteration'\n"
            "set ylabel 'loss'\n"
            "plot 'loss_curve.csv' using 1:2 with lines\n"
        )
    eio.write_depth_pfm(
        out / "final_depth_t.pfm", final_state.depth_t(valid=valid)
    )
    eio.write_pose_json(out / "final_pose.json", to_pose(final_state.pose_vec))


def _optim_config(args) -> OptimConfig:
    return OptimConfig(
        step_depth=args.step_depth,
        step_pose=args.step_pose,
        max_iterations=args.iterations,
        weights=LossWeights(args.alpha, args.beta, args.gamma, args.omega),
        scales=args.scales,
        icp=_icp_params(args),
        normalize=args.normalize,
        adam=args.adam,
        freeze_depth=args.freeze_depth,
        freeze_pose=args.freeze_pose,
    )


def _initial_state(pair: FramePair, args) -> OptimState:
    state = OptimState.from_depths(pair.depth_t, pair.depth_tm1)
    if args.init_depth_scale != 1.0:
        state.log_depth_t += np.log(args.init_depth_scale)
        state.log_depth_tm1 += np.log(args.init_depth_scale)
    if args.init_pose:
        state.pose_vec = _parse_vec6(args.init_pose)
    else:
        state.pose_vec = to_vector(pair.pose)
    return state


def _add_optim_args(p):
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--step-depth", type=float, default=1e-2)
    p.add_argument("--step-pose", type=float, default=1e-4)
    p.add_argument("--adam", action="store_true", help="Adam-style step scaling")
    p.add_argument("--freeze-depth", action="store_true")
    p.add_argument("--freeze-pose", action="store_true")
    p.add_argument(
        "--init-depth-scale",
        type=float,
        default=1.0,
        help="multiply the true depth by this factor to form the initial guess",
    )
    p.add_argument(
        "--init-pose", help="initial pose 6-vector (default: the pair's true pose)"
    )


def cmd_optimize(args) -> int:
    pair = _load_pair(args)
    state = _initial_state(pair, args)
    final, trace = optimize_pair(pair, state, _optim_config(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_trace_outputs(out, trace, final, pair.depth_t.valid)
    if args.verbose:
        print(f"finished after {final.iteration} iterations")
    return 0


def cmd_ablate(args) -> int:
    pair = _load_pair(args)
    state = _initial_state(pair, args)
    variants = {"all_terms": set()}
    for spec in args.disable or []:
        terms = {t.strip() for t in spec.split(",") if t.strip()}
        variants["no_" + "_".join(sorted(terms))] = terms
    report = ablate(pair, state, _optim_config(args), variants)
    eio.write_json(args.out, report)
    return 0


def cmd_eval_depth(args) -> int:
    pred = _load_depth(args.pred)
    gt = _load_depth(args.gt)
    crop = eio.read_mask_png(_checked(args.crop_mask)) if args.crop_mask else None
    result = depth_metrics(pred, gt, cap=args.cap, crop_mask=crop)
    eio.write_json(args.out, result.to_dict())
    print(result.table())
    return 0


def cmd_eval_odom(args) -> int:
    pred = eio.read_trajectory_kitti(_checked(args.pred))
    gt = eio.read_trajectory_kitti(_checked(args.gt))
    result = ate(pred, gt, snippet_len=args.snippet)
    eio.write_json(args.out, result.to_dict())
    print(f"ATE: {result.mean:.6f} +/- {result.std:.6f} over {result.num_snippets} snippets")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--verbose", action="store_true")
    common.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("EGODEPTH_THREADS", "0")),
        help="cap BLAS worker threads (0 = library default)",
    )
    parser = argparse.ArgumentParser(
        prog="egodepth",
        description="differentiable depth/ego-motion geometry toolkit",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_sub(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    p = add_sub("synth", "render a synthetic frame pair")
    p.add_argument("--scene", required=True)
    p.add_argument("--ego")
    p.add_argument("--intrinsics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = add_sub("warp", "warp frame t-1 into frame t")
    _add_pair_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_warp)

    p = add_sub("icp", "register two PLY point clouds")
    p.add_argument("--source", required=True)
    p.add_argument("--target")
    p.add_argument("--self", dest="self_register", action="store_true")
    p.add_argument("--init", help="initial pose JSON")
    _add_icp_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_icp)

    p = add_sub("loss", "evaluate the combined loss on a pair")
    _add_pair_args(p)
    _add_weight_args(p)
    _add_icp_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_loss)

    p = add_sub("optimize", "gradient-descend depth and pose")
    _add_pair_args(p)
    _add_weight_args(p)
    _add_icp_args(p)
    _add_optim_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_optimize)

    p = add_sub("ablate", "optimize with loss terms disabled")
    _add_pair_args(p)
    _add_weight_args(p)
    _add_icp_args(p)
    _add_optim_args(p)
    p.add_argument(
        "--disable",
        action="append",
        help="comma-separated terms to zero (reconstruction,3d,smoothness,ssim); repeatable",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = add_sub("eval-depth", "depth metrics against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--cap", type=float, default=80.0)
    p.add_argument("--crop-mask")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_depth)

    p = add_sub("eval-odom", "absolute trajectory error")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--snippet", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_odom)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
