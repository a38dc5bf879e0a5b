"""Design studies: finger link-length optimisation and reachability scoring.

The gripper objective is a planar caging criterion over a sample of fruit
widths: a width is caged when the palm plus both finger links can wrap
half the fruit circumference while the palm itself still fits against the
fruit. The objective is a discontinuous success count, so an exhaustive
grid search is used; at desk scale it is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arm import ArmModel, inverse_kinematics
from .errors import UnreachableError
from .geometry import Pose


@dataclass(frozen=True)
class FingerLinkBounds:
    proximal: tuple[float, float] = (0.02, 0.08)
    distal: tuple[float, float] = (0.02, 0.08)
    palm_width: tuple[float, float] = (0.02, 0.10)

    def __post_init__(self):
        for lo, hi in (self.proximal, self.distal, self.palm_width):
            if not 0 < lo <= hi:
                raise ValueError("bounds must satisfy 0 < low <= high")


@dataclass(frozen=True)
class FingerLinkDesign:
    proximal_length: float
    distal_length: float
    palm_width: float
    score: float   # fraction of sampled widths successfully caged


def cages(widths: np.ndarray, proximal: float, distal: float, palm: float) -> np.ndarray:
    """Planar caging test: wrap condition and palm contact condition."""
    w = np.asarray(widths, dtype=float)
    wrap = palm + 2.0 * (proximal + distal) >= np.pi * w / 2.0
    contact = palm <= w
    return wrap & contact


def optimize_finger_links(size_samples: np.ndarray, bounds: FingerLinkBounds,
                          grid_resolution: int) -> FingerLinkDesign:
    """Exhaustive grid search over (proximal, distal, palm_width).

    Returns the argmax caging score; ties break toward the smallest total
    link length (proximal + distal), then toward the first grid point in
    iteration order.
    """
    widths = np.asarray(size_samples, dtype=float).ravel()
    if widths.size == 0:
        raise ValueError("size_samples must be non-empty")
    if grid_resolution < 1:
        raise ValueError("grid_resolution must be >= 1")

    def axis(lo_hi: tuple[float, float]) -> np.ndarray:
        lo, hi = lo_hi
        return np.linspace(lo, hi, grid_resolution) if grid_resolution > 1 else np.array([lo])

    best: FingerLinkDesign | None = None
    for p in axis(bounds.proximal):
        for d in axis(bounds.distal):
            for b in axis(bounds.palm_width):
                score = float(np.count_nonzero(cages(widths, p, d, b))) / widths.size
                if best is None or score > best.score or (
                        score == best.score
                        and p + d < best.proximal_length + best.distal_length):
                    best = FingerLinkDesign(float(p), float(d), float(b), score)
    return best


@dataclass(frozen=True)
class ReachabilityResult:
    reached_fraction: float
    failed_targets: tuple[Pose, ...]


def reachability_score(arm: ArmModel, targets: "list[Pose]") -> ReachabilityResult:
    """Fraction of targets solvable by IK from the arm's home seed."""
    if not targets:
        raise ValueError("targets must be non-empty")
    failed = []
    for target in targets:
        try:
            inverse_kinematics(arm, target, arm.home())
        except UnreachableError:
            failed.append(target)
    return ReachabilityResult(1.0 - len(failed) / len(targets), tuple(failed))
