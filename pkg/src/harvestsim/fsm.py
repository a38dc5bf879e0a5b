"""Five-stage harvest state machine and the attach/detach outcome models.

The pipeline per crop is Scan -> Detect -> SelectGrasp -> Attach -> Detach.
Detachment is attempted whether or not attachment succeeded; the magnetic
coupling between suction cup and cutter is modeled purely as sequencing
plus a recoupling time cost. Attachment and detachment share one sampled
localization error per crop, which couples their failures the way a
common perception error would on real hardware.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import IllegalTransitionError
from .geometry import ray_disc, ray_ellipsoid, ellipsoid_normal, unit
from .grasp import GraspPlan
from .scene import Scene, WORLD_UP


class Stage(Enum):
    SCAN = "Scan"
    DETECT = "Detect"
    SELECT_GRASP = "SelectGrasp"
    ATTACH = "Attach"
    DETACH = "Detach"
    DONE = "Done"
    FAILED = "Failed"


class Event(Enum):
    SCAN_COMPLETE = "ScanComplete"
    CROP_FOUND = "CropFound"
    NO_CROP = "NoCrop"
    PLAN_READY = "PlanReady"
    ATTACHED = "Attached"
    ATTACH_FAILED_CONTINUE = "AttachFailedContinue"
    DETACHED = "Detached"
    ABORT = "Abort"


@dataclass(frozen=True)
class HarvestState:
    stage: Stage
    failed_at: Stage | None = None


INITIAL_STATE = HarvestState(Stage.SCAN)

_TRANSITIONS: dict[tuple[Stage, Event], Stage] = {
    (Stage.SCAN, Event.SCAN_COMPLETE): Stage.DETECT,
    (Stage.DETECT, Event.CROP_FOUND): Stage.SELECT_GRASP,
    (Stage.DETECT, Event.NO_CROP): Stage.FAILED,
    (Stage.SELECT_GRASP, Event.PLAN_READY): Stage.ATTACH,
    (Stage.ATTACH, Event.ATTACHED): Stage.DETACH,
    (Stage.ATTACH, Event.ATTACH_FAILED_CONTINUE): Stage.DETACH,
    (Stage.DETACH, Event.DETACHED): Stage.DONE,
}

ACTIVE_STAGES = (Stage.SCAN, Stage.DETECT, Stage.SELECT_GRASP, Stage.ATTACH, Stage.DETACH)


def step(state: HarvestState, event: Event) -> HarvestState:
    """Advance the state machine; illegal events raise and leave no trace.

    Abort is legal in every active stage and records where it happened.
    Done and Failed are terminal.
    """
    if state.stage in (Stage.DONE, Stage.FAILED):
        raise IllegalTransitionError(f"{state.stage.value} is terminal; no event {event.value}")
    if event is Event.ABORT:
        return HarvestState(Stage.FAILED, failed_at=state.stage)
    nxt = _TRANSITIONS.get((state.stage, event))
    if nxt is None:
        raise IllegalTransitionError(f"event {event.value} is not legal in stage {state.stage.value}")
    if nxt is Stage.FAILED:
        return HarvestState(Stage.FAILED, failed_at=state.stage)
    return HarvestState(nxt)


# --- strategies ----------------------------------------------------------


@dataclass(frozen=True)
class SuctionCup:
    """Vacuum cup on a compliant mount, approach along the grasp axis."""

    cup_radius: float = 0.015
    max_normal_angle: float = np.deg2rad(35.0)
    localization_std: float = 0.015

    def __post_init__(self):
        if min(self.cup_radius, self.max_normal_angle, self.localization_std) < 0:
            raise ValueError("SuctionCup parameters must be non-negative")


@dataclass(frozen=True)
class FourFingerGripper:
    """Underactuated four-finger gripper; prone to catching neighbouring
    geometry and to pivot slip away from the fruit's mid-plane."""

    aperture: float = 0.11
    entanglement_radius: float = 0.06
    pivot_slip_angle: float = np.deg2rad(25.0)
    max_normal_angle: float = np.deg2rad(45.0)
    localization_std: float = 0.015

    def __post_init__(self):
        if min(self.aperture, self.entanglement_radius, self.pivot_slip_angle) <= 0:
            raise ValueError("FourFingerGripper parameters must be positive")


@dataclass(frozen=True)
class OscillatingBlade:
    """Horizontal blade swept through the expected peduncle position."""

    blade_half_width: float = 0.0265
    lateral_error_std: float = 0.002

    def __post_init__(self):
        if self.blade_half_width <= 0 or self.lateral_error_std < 0:
            raise ValueError("OscillatingBlade parameters must be positive")


@dataclass(frozen=True)
class SnapPull:
    """Tethered upward pull; thin peduncles part cleanly at the abscission
    zone, thick ones tear or hold on."""

    clean_diameter: float = 0.006
    max_diameter: float = 0.009

    def __post_init__(self):
        if self.clean_diameter <= 0 or self.max_diameter <= 0:
            raise ValueError("SnapPull diameters must be positive")
        if self.clean_diameter >= self.max_diameter:
            raise ValueError("clean_diameter must be < max_diameter")


@dataclass(frozen=True)
class WireLoop:
    """Wire loop closed behind the peduncle and pulled tight."""

    max_gap_diameter: float = 0.012
    max_toughness: float = 0.55

    def __post_init__(self):
        if self.max_gap_diameter <= 0 or self.max_toughness <= 0:
            raise ValueError("WireLoop parameters must be positive")


AttachStrategy = SuctionCup | FourFingerGripper
DetachStrategy = OscillatingBlade | SnapPull | WireLoop


class Reason(Enum):
    OK = "Ok"
    ANGLE_TOO_STEEP = "AngleTooSteep"
    LEAF_BLOCKED = "LeafBlocked"
    ENTANGLEMENT = "Entanglement"
    PIVOT_SLIP = "PivotSlip"
    PEDUNCLE_MISSED = "PeduncleMissed"
    PEDUNCLE_TORE = "PeduncleTore"
    TOO_TOUGH = "TooTough"
    TOO_THICK = "TooThick"


@dataclass(frozen=True)
class AttachOutcome:
    success: bool
    reason: Reason
    # sampled localization error, reused by the detach attempt
    localization_error: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class DetachOutcome:
    success: bool
    reason: Reason
    clean_break: bool = False


_LEAF_CHECK_RANGE = 0.1   # m of approach before contact checked for leaves


def _leaf_blocks_segment(scene: Scene, start: np.ndarray, direction: np.ndarray,
                         length: float) -> bool:
    for leaf in scene.leaves:
        t = ray_disc(start, direction[None, :], leaf.center, leaf.normal,
                     leaf.radii, leaf.basis)[0]
        if t < length - 1e-9:
            return True
    return False


def attempt_attach(strategy: AttachStrategy, plan: GraspPlan, scene: Scene,
                   pepper_id: int, rng: np.random.Generator) -> AttachOutcome:
    """Simulate one attachment attempt against ground truth.

    A localization error vector (std = strategy.localization_std per axis)
    displaces the planned approach ray. The displaced ray must land on the
    pepper, the last 10 cm of approach must be leaf free, and the contact
    angle must stay inside the strategy's cone. The four-finger gripper
    additionally fails on nearby foreign geometry (entanglement) and on
    approaches that leave the fruit's horizontal mid-plane (pivot slip).
    Failures are outcomes, never exceptions.
    """
    pepper = scene.pepper_by_id(pepper_id)
    error = rng.normal(0.0, strategy.localization_std, size=3)
    approach = plan.grasp_pose.z_axis()
    origin = plan.grasp_pose.position + error - 0.3 * approach

    t = ray_ellipsoid(origin, approach[None, :], pepper.centroid, pepper.semi_axes)[0]
    if not np.isfinite(t):
        # displaced ray slid off the fruit: the limiting case of a grazing,
        # over-steep contact
        return AttachOutcome(False, Reason.ANGLE_TOO_STEEP, error)
    contact = origin + t * approach

    if _leaf_blocks_segment(scene, contact - _LEAF_CHECK_RANGE * approach,
                            approach, _LEAF_CHECK_RANGE):
        return AttachOutcome(False, Reason.LEAF_BLOCKED, error)

    if isinstance(strategy, FourFingerGripper):
        if _foreign_geometry_near(scene, pepper_id, contact, strategy.entanglement_radius):
            return AttachOutcome(False, Reason.ENTANGLEMENT, error)

    normal = ellipsoid_normal(contact[None, :], pepper.centroid, pepper.semi_axes)[0]
    cos_angle = float(np.clip(-approach @ normal, -1.0, 1.0))
    if np.arccos(cos_angle) > strategy.max_normal_angle:
        return AttachOutcome(False, Reason.ANGLE_TOO_STEEP, error)

    if isinstance(strategy, FourFingerGripper):
        elevation = abs(np.pi / 2.0 - np.arccos(float(np.clip(approach @ WORLD_UP, -1.0, 1.0))))
        if elevation > strategy.pivot_slip_angle:
            return AttachOutcome(False, Reason.PIVOT_SLIP, error)

    return AttachOutcome(True, Reason.OK, error)


def _foreign_geometry_near(scene: Scene, pepper_id: int, point: np.ndarray,
                           radius: float) -> bool:
    for leaf in scene.leaves:
        # conservative: sphere bound around the leaf disc
        if np.linalg.norm(leaf.center - point) <= radius + float(np.max(leaf.radii)):
            return True
    for other in scene.peppers:
        if other.id == pepper_id:
            continue
        if np.linalg.norm(other.centroid - point) <= radius + float(np.max(other.semi_axes)):
            return True
    return False


def attempt_detach(strategy: DetachStrategy, plan: GraspPlan, scene: Scene,
                   pepper_id: int, rng: np.random.Generator,
                   shared_error: np.ndarray | None = None) -> DetachOutcome:
    """Simulate one detachment attempt.

    OscillatingBlade: the blade edge spans +/- blade_half_width along the
    cut axis; the cut succeeds iff the true peduncle axis, the planned cut
    position displaced by the shared localization error, and fresh blade
    noise line up within that span. SnapPull succeeds up to max_diameter
    (clean up to clean_diameter, torn-but-removed above it). WireLoop
    fails on peduncles too thick for the gap or too tough for the wire.
    """
    pepper = scene.pepper_by_id(pepper_id)
    ped = pepper.peduncle
    if isinstance(strategy, OscillatingBlade):
        shared = np.zeros(3) if shared_error is None else np.asarray(shared_error, dtype=float)
        cut_axis = plan.cut_pose.z_axis()
        cut_pos = plan.cut_pose.position
        # true peduncle centre at the blade's height
        axis_climb = float(ped.axis @ WORLD_UP)
        if abs(axis_climb) < 1e-6:
            reach = 0.0
        else:
            reach = float((cut_pos - ped.attach_point) @ WORLD_UP) / axis_climb
        reach = float(np.clip(reach, 0.0, ped.length))
        target = ped.attach_point + reach * ped.axis
        planned = float((cut_pos - target) @ cut_axis)
        offset = planned + float(shared @ cut_axis) + float(rng.normal(0.0, strategy.lateral_error_std))
        if abs(offset) <= strategy.blade_half_width:
            return DetachOutcome(True, Reason.OK)
        return DetachOutcome(False, Reason.PEDUNCLE_MISSED)

    if isinstance(strategy, SnapPull):
        if ped.diameter <= strategy.clean_diameter:
            return DetachOutcome(True, Reason.OK, clean_break=True)
        if ped.diameter <= strategy.max_diameter:
            # removed with some tearing: still a successful removal
            return DetachOutcome(True, Reason.OK, clean_break=False)
        return DetachOutcome(False, Reason.PEDUNCLE_TORE)

    if isinstance(strategy, WireLoop):
        if ped.diameter > strategy.max_gap_diameter:
            return DetachOutcome(False, Reason.TOO_THICK)
        if ped.toughness > strategy.max_toughness:
            return DetachOutcome(False, Reason.TOO_TOUGH)
        return DetachOutcome(True, Reason.OK)

    raise TypeError(f"unknown detach strategy {type(strategy).__name__}")


# --- timing ---------------------------------------------------------------


@dataclass(frozen=True)
class TimingModel:
    """Base seconds per stage; arm travel for the scan sweep is added on
    top via cycle_time's arm_moves argument."""

    scan_per_waypoint: float = 4.5
    detect: float = 1.2
    select: float = 0.8
    attach_move: float = 6.5
    detach_move: float = 6.0
    magnet_recouple: float = 2.5

    def __post_init__(self):
        if min(self.scan_per_waypoint, self.detect, self.select, self.attach_move,
               self.detach_move, self.magnet_recouple) < 0:
            raise ValueError("timing entries must be non-negative")


@dataclass
class HarvestAttempt:
    pepper_id: int
    stages_visited: list[Stage] = field(default_factory=list)
    stage_durations: dict[Stage, float] = field(default_factory=dict)
    attach_outcome: AttachOutcome | None = None
    detach_outcome: DetachOutcome | None = None
    final_state: HarvestState = INITIAL_STATE
    total_time: float = 0.0


def cycle_time(attempt: HarvestAttempt, timing: TimingModel,
               scan_waypoints: int, arm_moves: float) -> float:
    """Fill in per-stage durations for the stages the attempt visited and
    return the total, which is stored on the attempt.

    Scanning is the vision sweep, so the arm travel time (arm_moves) is
    booked against the scan stage; attach/detach moves and the magnet
    recoupling are fixed per-stage costs.
    """
    costs = {
        Stage.SCAN: timing.scan_per_waypoint * scan_waypoints + arm_moves,
        Stage.DETECT: timing.detect,
        Stage.SELECT_GRASP: timing.select,
        Stage.ATTACH: timing.attach_move,
        Stage.DETACH: timing.detach_move + timing.magnet_recouple,
    }
    attempt.stage_durations = {s: costs[s] for s in attempt.stages_visited if s in costs}
    attempt.total_time = float(sum(attempt.stage_durations.values()))
    return attempt.total_time
