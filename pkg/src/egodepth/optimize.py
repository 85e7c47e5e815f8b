"""Direct gradient descent on a per-pixel depth map and a pose 6-vector.

This driver stands in for a learned predictor at desk scale: starting from
perturbed or flat estimates, it descends the combined multi-scale loss for
a single frame pair. Depth is parameterized as log-depth so positivity
holds by construction. Plain per-group fixed-step gradient descent is the
default; Adam-style moment scaling is available behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .camera import DepthMap
from .icp import IcpParams
from .losses import LossWeights, SsimParams, total_loss
from .se3 import to_pose, to_vector
from .synth import FramePair

LOSS_ZERO = 1e-14


class NonFiniteLossError(RuntimeError):
    """A loss term went non-finite; the message names term and location."""


@dataclass
class OptimState:
    """Current estimates: log-depth grids for both frames plus the pose.

    The combined loss needs depth for both frames of the pair, so the state
    carries one log-depth grid per frame.
    """

    log_depth_t: np.ndarray
    log_depth_tm1: np.ndarray
    pose_vec: np.ndarray
    iteration: int = 0
    loss_history: list = field(default_factory=list)

    @classmethod
    def from_depths(cls, depth_t: DepthMap, depth_tm1: DepthMap, pose_vec=None):
        safe_t = np.where(depth_t.valid, depth_t.values, 1.0)
        safe_tm1 = np.where(depth_tm1.valid, depth_tm1.values, 1.0)
        return cls(
            log_depth_t=np.log(safe_t),
            log_depth_tm1=np.log(safe_tm1),
            pose_vec=np.zeros(6) if pose_vec is None else np.array(pose_vec, dtype=np.float64),
        )

    def depth_t(self, valid=None) -> DepthMap:
        return DepthMap(values=np.exp(self.log_depth_t), valid=valid)

    def depth_tm1(self, valid=None) -> DepthMap:
        return DepthMap(values=np.exp(self.log_depth_tm1), valid=valid)

    def copy(self) -> "OptimState":
        return OptimState(
            log_depth_t=self.log_depth_t.copy(),
            log_depth_tm1=self.log_depth_tm1.copy(),
            pose_vec=self.pose_vec.copy(),
            iteration=self.iteration,
            loss_history=list(self.loss_history),
        )


@dataclass(frozen=True)
class OptimConfig:
    step_depth: float = 1e-2
    step_pose: float = 1e-4
    max_iterations: int = 2000
    weights: LossWeights = LossWeights()
    scales: int = 4
    icp: IcpParams = IcpParams()
    ssim: SsimParams = SsimParams()
    convergence_threshold: float = 1e-9  # relative loss change
    normalize: bool = False
    adam: bool = False
    freeze_depth: bool = False
    freeze_pose: bool = False

    def __post_init__(self):
        if self.step_depth <= 0 or self.step_pose <= 0:
            raise ValueError("step sizes must be positive")
        if not 1 <= self.scales <= 4:
            raise ValueError("scales must be in 1..4")


def _check_finite(breakdown, iteration):
    for s, scale in enumerate(breakdown.terms):
        for direction, vals in scale.items():
            for name, v in vals.items():
                if not np.isfinite(v):
                    raise NonFiniteLossError(
                        f"iteration {iteration}: loss term {name!r} "
                        f"(scale {s}, direction {direction}) is {v}"
                    )
    for label, g in (
        ("depth_t", breakdown.grad_depth_t),
        ("depth_tm1", breakdown.grad_depth_tm1),
    ):
        if g is not None and not np.isfinite(g).all():
            j, i = np.argwhere(~np.isfinite(g))[0]
            raise NonFiniteLossError(
                f"iteration {iteration}: gradient w.r.t. {label} non-finite "
                f"at pixel (row {j}, col {i})"
            )
    if not np.isfinite(breakdown.grad_pose).all():
        raise NonFiniteLossError(
            f"iteration {iteration}: pose gradient non-finite"
        )


class _Adam:
    """Minimal Adam accumulator for one parameter group."""

    def __init__(self, shape, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def step(self, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mh = self.m / (1 - self.beta1**self.t)
        vh = self.v / (1 - self.beta2**self.t)
        return mh / (np.sqrt(vh) + self.eps)


def evaluate(pair: FramePair, state: OptimState, cfg: OptimConfig):
    """One loss/gradient evaluation of the pair at the given state."""
    depth_t = state.depth_t(valid=pair.depth_t.valid)
    depth_tm1 = state.depth_tm1(valid=pair.depth_tm1.valid)
    pose = to_pose(state.pose_vec)
    return total_loss(
        frames=(pair.image_tm1, pair.image_t),
        depths=(depth_tm1, depth_t),
        pose=pose,
        k=pair.intrinsics,
        weights=cfg.weights,
        scales=cfg.scales,
        icp_params=cfg.icp,
        ssim_params=cfg.ssim,
        normalize=cfg.normalize,
    )


def optimize_pair(pair: FramePair, init: OptimState, cfg: OptimConfig):
    """Descend the combined loss; returns (final state, per-iteration trace).

    Stops on the iteration budget, on relative loss change below the
    configured threshold, or on a numerically zero loss.
    """
    state = init.copy()
    trace = []
    adam_dt = adam_dtm1 = adam_pose = None
    if cfg.adam:
        adam_dt = _Adam(state.log_depth_t.shape)
        adam_dtm1 = _Adam(state.log_depth_tm1.shape)
        adam_pose = _Adam((6,))

    prev_loss = None
    for it in range(cfg.max_iterations):
        breakdown = evaluate(pair, state, cfg)
        _check_finite(breakdown, it)
        loss = breakdown.total
        state.loss_history.append(loss)
        trace.append(
            {
                "iteration": it,
                "total": loss,
                "terms": {
                    name: breakdown.term_total(name)
                    for name in ("reconstruction", "3d", "smoothness", "ssim")
                },
            }
        )

        if loss < LOSS_ZERO:
            break
        if prev_loss is not None:
            rel = abs(prev_loss - loss) / max(abs(prev_loss), LOSS_ZERO)
            if rel < cfg.convergence_threshold:
                break
        prev_loss = loss

        if not cfg.freeze_depth:
            # chain to log-depth: dL/dlog d = d * dL/dd
            g_t = breakdown.grad_depth_t * np.exp(state.log_depth_t)
            g_tm1 = breakdown.grad_depth_tm1 * np.exp(state.log_depth_tm1)
            if cfg.adam:
                g_t = adam_dt.step(g_t)
                g_tm1 = adam_dtm1.step(g_tm1)
            state.log_depth_t = state.log_depth_t - cfg.step_depth * g_t
            state.log_depth_tm1 = state.log_depth_tm1 - cfg.step_depth * g_tm1
        if not cfg.freeze_pose:
            g_p = breakdown.grad_pose
            if cfg.adam:
                g_p = adam_pose.step(g_p)
            state.pose_vec = state.pose_vec - cfg.step_pose * g_p
        state.iteration = it + 1

    return state, trace


def depth_error(state: OptimState, truth: DepthMap) -> float:
    """Mean relative depth error |d - d*| / d* over valid truth pixels."""
    d = np.exp(state.log_depth_t)
    sel = truth.valid
    return float(np.mean(np.abs(d[sel] - truth.values[sel]) / truth.values[sel]))


def pose_error(state: OptimState, truth) -> tuple[float, float]:
    """(rotation error radians, translation error norm) against a true pose."""
    from .se3 import pose_distance

    return pose_distance(to_pose(state.pose_vec), truth)


def ablate(pair: FramePair, init: OptimState, cfg: OptimConfig, variants: dict):
    """Run one optimization per variant with the named loss terms zeroed.

    `variants` maps a label to a set drawn from {"reconstruction", "3d",
    "smoothness", "ssim"}. Returns label -> report with the final errors
    against the pair's ground truth, side by side.
    """
    term_to_weight = {
        "reconstruction": "alpha",
        "3d": "beta",
        "smoothness": "gamma",
        "ssim": "omega",
    }
    report = {}
    for label, disable in variants.items():
        unknown = set(disable) - set(term_to_weight)
        if unknown:
            raise ValueError(f"unknown loss terms {sorted(unknown)}")
        overrides = {term_to_weight[t]: 0.0 for t in disable}
        wcfg = replace(cfg, weights=replace(cfg.weights, **overrides))
        final, trace = optimize_pair(pair, init, wcfg)
        rot_err, trans_err = pose_error(final, pair.pose)
        report[label] = {
            "disabled": sorted(disable),
            "iterations": final.iteration,
            "final_loss": trace[-1]["total"] if trace else 0.0,
            "depth_abs_rel": depth_error(final, pair.depth_t),
            "pose_rotation_error_rad": rot_err,
            "pose_translation_error": trans_err,
        }
    return report
