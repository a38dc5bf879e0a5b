"""7-DOF manipulator kinematics, scan paths and trajectory timing.

The arm is a serial chain of revolute joints. Each joint descriptor holds
the fixed link transform from the parent frame (translation plus optional
fixed rotation) followed by a rotation of q radians about the joint axis.
Inverse kinematics is damped least squares on the geometric Jacobian; the
trellis workspace is obstacle free, so no motion planning is layered on
top of joint-space interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, UnreachableError
from .geometry import (
    Pose,
    look_at,
    quat_from_axis_angle,
    quat_identity,
    quat_mul,
    quat_rotate,
    quat_to_matrix,
    rotation_vector,
    unit,
)

DEFAULT_DAMPING = 0.05
DEFAULT_ORI_TOL = 0.01      # rad
MAX_STEP = 0.2              # rad per joint per iteration


@dataclass(frozen=True)
class JointSpec:
    axis: tuple[float, float, float]
    offset: tuple[float, float, float]          # translation from parent frame
    fixed_rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    low: float = -2.9
    high: float = 2.9
    max_speed: float = 1.0                       # rad/s

    def __post_init__(self):
        if self.low >= self.high:
            raise ConfigurationError("joint limit low must be < high")
        if self.max_speed <= 0:
            raise ConfigurationError("joint max_speed must be > 0")


@dataclass(frozen=True)
class ArmModel:
    joints: tuple[JointSpec, ...]
    base: Pose = field(default_factory=Pose)
    tool_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    home_q: tuple[float, ...] | None = None      # preferred IK seed; defaults to zeros

    def __post_init__(self):
        if len(self.joints) == 0:
            raise ConfigurationError("arm needs at least one joint")
        if self.home_q is not None and len(self.home_q) != len(self.joints):
            raise ConfigurationError("home_q length must match joint count")

    @property
    def dof(self) -> int:
        return len(self.joints)

    def home(self) -> np.ndarray:
        return np.array(self.home_q) if self.home_q is not None else np.zeros(self.dof)

    def limits(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([j.low for j in self.joints]),
                np.array([j.high for j in self.joints]))

    def max_speeds(self) -> np.ndarray:
        return np.array([j.max_speed for j in self.joints])

    def reach(self) -> float:
        """Upper bound on end-effector distance from the base position."""
        return float(sum(np.linalg.norm(j.offset) for j in self.joints)
                     + np.linalg.norm(self.tool_offset))

    def check_limits(self, q: np.ndarray) -> None:
        lo, hi = self.limits()
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ConfigurationError(f"expected {self.dof} joint angles, got shape {q.shape}")
        if np.any(q < lo - 1e-9) or np.any(q > hi + 1e-9):
            raise ConfigurationError("joint configuration violates limits")


def _chain_frames(arm: ArmModel, q: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray], Pose]:
    """World joint origins and axes for each joint, plus the tool pose."""
    pos = arm.base.position.copy()
    quat = arm.base.orientation.copy()
    origins, axes = [], []
    for spec, angle in zip(arm.joints, q):
        pos = pos + quat_rotate(quat, np.asarray(spec.offset, dtype=float))
        quat = quat_mul(quat, np.asarray(spec.fixed_rotation, dtype=float))
        axis_world = quat_rotate(quat, np.asarray(spec.axis, dtype=float))
        origins.append(pos)
        axes.append(axis_world)
        quat = quat_mul(quat, quat_from_axis_angle(np.asarray(spec.axis, dtype=float), float(angle)))
        quat = quat / np.linalg.norm(quat)
    tool = pos + quat_rotate(quat, np.asarray(arm.tool_offset, dtype=float))
    return origins, axes, Pose(tool, quat)


def forward_kinematics(arm: ArmModel, q: np.ndarray) -> Pose:
    """Tool pose for a joint configuration; raises if q violates limits."""
    q = np.asarray(q, dtype=float)
    arm.check_limits(q)
    return _chain_frames(arm, q)[2]


def _jacobian(arm: ArmModel, q: np.ndarray) -> tuple[np.ndarray, Pose]:
    origins, axes, tool = _chain_frames(arm, q)
    jac = np.zeros((6, arm.dof))
    for i, (o, a) in enumerate(zip(origins, axes)):
        jac[:3, i] = np.cross(a, tool.position - o)
        jac[3:, i] = a
    return jac, tool


def _pose_error(current: Pose, target: Pose) -> tuple[np.ndarray, float, float]:
    e_pos = target.position - current.position
    r_err = quat_to_matrix(target.orientation) @ quat_to_matrix(current.orientation).T
    e_rot = rotation_vector(r_err)
    return np.concatenate([e_pos, e_rot]), float(np.linalg.norm(e_pos)), float(np.linalg.norm(e_rot))


def inverse_kinematics(arm: ArmModel, target: Pose, seed_q: np.ndarray | None = None,
                       tol: float = 1e-4, max_iters: int = 200,
                       damping: float = DEFAULT_DAMPING,
                       ori_tol: float = DEFAULT_ORI_TOL) -> np.ndarray:
    """Damped-least-squares IK from seed_q toward a full 6-DOF target.

    Returns joint angles with position error < tol and orientation error
    < ori_tol, clamped to limits. Raises UnreachableError when the target
    is beyond the arm's reach or the iteration does not converge.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be > 0")
    if np.linalg.norm(target.position - arm.base.position) > arm.reach():
        raise UnreachableError("target lies beyond the arm's maximum reach")
    lo, hi = arm.limits()
    q = np.clip(np.asarray(seed_q, dtype=float).copy() if seed_q is not None else arm.home(),
                lo, hi)

    lam2 = damping * damping
    for _ in range(max_iters + 1):
        jac, current = _jacobian(arm, q)
        err, pos_err, rot_err = _pose_error(current, target)
        if pos_err < tol and rot_err < ori_tol:
            return q
        # weight orientation error down so meters and radians mix sanely
        err[3:] *= 0.5
        jjt = jac @ jac.T + lam2 * np.eye(6)
        dq = jac.T @ np.linalg.solve(jjt, err)
        peak = float(np.max(np.abs(dq)))
        if peak > MAX_STEP:
            dq *= MAX_STEP / peak
        q = np.clip(q + dq, lo, hi)
    raise UnreachableError(
        f"IK did not converge in {max_iters} iterations "
        f"(pos err {pos_err:.2e} m, ori err {rot_err:.2e} rad)")


# --- scan paths ---------------------------------------------------------


@dataclass(frozen=True)
class SingleView:
    """One viewpoint covering the whole region."""


@dataclass(frozen=True)
class Arc:
    """k viewpoints on a horizontal arc around the region centre."""

    k: int
    span: float = np.deg2rad(90.0)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError("Arc needs k >= 1")


def plan_scan_trajectory(region: tuple[np.ndarray, np.ndarray],
                         mode: "SingleView | Arc",
                         standoff: float,
                         approach_dir: np.ndarray = (0.0, 1.0, 0.0),
                         up: np.ndarray = (0.0, 0.0, 1.0)) -> list[Pose]:
    """Camera waypoints for scanning a region bbox (min, max corners).

    SingleView yields one pose at `standoff` from the region centre along
    approach_dir; Arc(k) yields k poses on a horizontal arc of radius
    standoff. Every pose aims its optical axis at the region centre. A
    degenerate (zero-volume) region is treated as its centre point.
    """
    if standoff <= 0:
        raise ConfigurationError("standoff must be > 0")
    lo, hi = (np.asarray(region[0], dtype=float), np.asarray(region[1], dtype=float))
    center = 0.5 * (lo + hi)
    approach = unit(np.asarray(approach_dir, dtype=float))
    up = unit(np.asarray(up, dtype=float))

    if isinstance(mode, SingleView):
        angles = [0.0]
    else:
        angles = np.linspace(-mode.span / 2.0, mode.span / 2.0, mode.k) if mode.k > 1 else [0.0]
    poses = []
    for ang in angles:
        rot = quat_from_axis_angle(up, float(ang))
        direction = quat_rotate(rot, approach)
        poses.append(look_at(center + standoff * direction, center, up))
    return poses


def trajectory_duration(arm: ArmModel, waypoints: "list[np.ndarray]") -> float:
    """Seconds for a synchronized joint-space path: per segment, the
    slowest joint sets the pace."""
    if len(waypoints) < 2:
        return 0.0
    speeds = arm.max_speeds()
    total = 0.0
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        delta = np.abs(np.asarray(b, dtype=float) - np.asarray(a, dtype=float))
        total += float(np.max(delta / speeds))
    return total


def default_arm(base: Pose | None = None) -> ArmModel:
    """Generic 7-DOF chain with ~0.9 m reach and a bent, nonsingular ready
    configuration for IK seeding. Parameters are conventions, not a model
    of any specific product."""
    joints = (
        JointSpec(axis=(0, 0, 1), offset=(0.0, 0.0, 0.14), max_speed=0.35),
        JointSpec(axis=(0, 1, 0), offset=(0.0, 0.0, 0.10), low=-2.2, high=2.2, max_speed=0.35),
        JointSpec(axis=(0, 0, 1), offset=(0.0, 0.0, 0.19), max_speed=0.45),
        JointSpec(axis=(0, 1, 0), offset=(0.0, 0.0, 0.09), low=-2.4, high=2.4, max_speed=0.45),
        JointSpec(axis=(0, 0, 1), offset=(0.0, 0.0, 0.19), max_speed=0.6),
        JointSpec(axis=(0, 1, 0), offset=(0.0, 0.0, 0.08), low=-2.4, high=2.4, max_speed=0.6),
        JointSpec(axis=(0, 0, 1), offset=(0.0, 0.0, 0.05), max_speed=0.6),
    )
    arm = ArmModel(joints=joints, tool_offset=(0.0, 0.0, 0.06),
                   home_q=(0.0, 0.5, 0.0, -1.1, 0.0, 0.8, 0.0))
    if base is not None:
        arm = replace(arm, base=base)
    return arm


HOME_POSE_POSITION = (0.0, 0.0, 0.90)   # forward_kinematics(default_arm(), zeros)
