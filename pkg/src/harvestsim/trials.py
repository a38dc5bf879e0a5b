"""End-to-end Monte-Carlo harvest trials and their reports.

run_trial simulates pepper_count independent crops. Each crop gets its own
scene and its own random stream derived from (trial seed, crop index), so
reports are identical whether the crops are simulated serially or on a
thread pool. The full pipeline runs per crop: scan waypoints, ray-cast
renders, colour detection, clustering, grasp planning, then the attach and
detach attempts with their shared localization error.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import presets
from .arm import Arc, SingleView, inverse_kinematics, plan_scan_trajectory, trajectory_duration
from .cloud import ColoredPointCloud
from .errors import ComparisonError, EmptyTrialError
from .fsm import (
    AttachStrategy,
    DetachStrategy,
    Event,
    HarvestAttempt,
    INITIAL_STATE,
    Reason,
    SnapPull,
    Stage,
    TimingModel,
    attempt_attach,
    attempt_detach,
    cycle_time,
    step,
)
from .grasp import GraspMethod, fit_model_grasp, make_grasp_plan, rank_grasp_candidates
from .perception import ColorModel, detect_color, segment_clusters
from .presets import ReferenceTrial
from .scene import SceneConfig, generate_scene, render_pointcloud, sample_lognormal


@dataclass(frozen=True)
class TrialConfig:
    cultivar: str = "Claire"
    scenario: str = "modified"
    pepper_count: int = 100
    seed: int = 0
    attach_strategy: AttachStrategy | None = None     # None: cultivar preset
    detach_strategy: DetachStrategy | None = None     # None: cultivar preset
    scan_mode: "SingleView | Arc | None" = None       # None: preset Arc(3)
    timing: TimingModel | None = None
    grasp_method: GraspMethod = GraspMethod.SURFACE_HEURISTIC

    @staticmethod
    def from_dict(d: dict) -> "TrialConfig":
        kw = dict(d)
        mode = kw.pop("scan_mode", None)
        if isinstance(mode, dict):
            kw["scan_mode"] = Arc(int(mode["arc"])) if "arc" in mode else SingleView()
        elif isinstance(mode, str):
            kw["scan_mode"] = SingleView() if mode == "single_view" else Arc(int(mode.removeprefix("arc:")))
        if "grasp_method" in kw:
            kw["grasp_method"] = GraspMethod(kw["grasp_method"])
        if "timing" in kw and isinstance(kw["timing"], dict):
            kw["timing"] = TimingModel(**kw["timing"])
        return TrialConfig(**kw)

    @staticmethod
    def from_file(path: str | Path) -> "TrialConfig":
        return TrialConfig.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class RateSummary:
    successes: int
    n: int
    rate: float
    wilson_low: float
    wilson_high: float


@dataclass
class TrialReport:
    cultivar: str
    scenario: str
    n: int
    seed: int
    scan_waypoints: int
    attach: RateSummary
    detach: RateSummary
    combined: RateSummary
    mean_cycle_time: float
    stage_shares: dict[str, float]
    failure_counts: dict[str, int]
    attempts: list[HarvestAttempt] = field(default_factory=list, repr=False)


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _rate_summary(successes: int, n: int) -> RateSummary:
    lo, hi = wilson_interval(successes, n)
    return RateSummary(successes, n, successes / n, lo, hi)


@dataclass(frozen=True)
class _TrialSetup:
    """Per-trial constants hoisted out of the per-crop loop."""

    scene_template: SceneConfig
    scan_poses: tuple
    camera_axis: np.ndarray
    scan_arm_moves: float
    sensor: object
    color_model: ColorModel
    cluster_radius: float
    cluster_min_points: int
    grasp_method: GraspMethod
    attach_strategy: AttachStrategy
    detach_strategy: DetachStrategy
    timing: TimingModel


def _build_setup(config: TrialConfig) -> _TrialSetup:
    scene_template = presets.cultivar_scene_config(config.cultivar, config.scenario)
    preset_attach, preset_detach = presets.trial_strategies(config.cultivar)
    mode = config.scan_mode if config.scan_mode is not None else presets.DEFAULT_SCAN_MODE
    poses = plan_scan_trajectory(presets.SCAN_REGION, mode, presets.SCAN_STANDOFF)

    arm = presets.harvest_arm()
    joint_path = [arm.home()]
    for pose in poses:
        joint_path.append(inverse_kinematics(arm, pose, joint_path[-1]))
    scan_arm_moves = trajectory_duration(arm, joint_path)

    return _TrialSetup(
        scene_template=scene_template,
        scan_poses=tuple(poses),
        camera_axis=poses[(len(poses) - 1) // 2].z_axis(),
        scan_arm_moves=scan_arm_moves,
        sensor=presets.TRIAL_SENSOR,
        color_model=presets.TRIAL_COLOR_MODEL,
        cluster_radius=presets.CLUSTER_RADIUS,
        cluster_min_points=presets.CLUSTER_MIN_POINTS,
        grasp_method=config.grasp_method,
        attach_strategy=config.attach_strategy or preset_attach,
        detach_strategy=config.detach_strategy or preset_detach,
        timing=config.timing or presets.DEFAULT_TIMING,
    )


def _simulate_pepper(setup: _TrialSetup, trial_seed: int, index: int) -> HarvestAttempt:
    """One crop through the full pipeline; pure function of (setup, seed, index)."""
    scene_ss, pipe_ss = np.random.SeedSequence([trial_seed, index]).spawn(2)
    scene_cfg = replace(setup.scene_template, seed=int(scene_ss.generate_state(1)[0]))
    rng = np.random.default_rng(pipe_ss)

    attempt = HarvestAttempt(pepper_id=index)
    state = INITIAL_STATE
    attempt.stages_visited.append(state.stage)

    scene = generate_scene(scene_cfg)
    clouds = [render_pointcloud(scene, pose, setup.sensor, rng) for pose in setup.scan_poses]
    cloud = ColoredPointCloud.merge(clouds)
    state = step(state, Event.SCAN_COMPLETE)
    attempt.stages_visited.append(state.stage)

    indices = detect_color(cloud, setup.color_model)
    detections = segment_clusters(cloud, indices, setup.cluster_radius, setup.cluster_min_points)
    if not detections:
        state = step(state, Event.NO_CROP)
        attempt.final_state = state
        cycle_time(attempt, setup.timing, len(setup.scan_poses), setup.scan_arm_moves)
        return attempt
    state = step(state, Event.CROP_FOUND)
    attempt.stages_visited.append(state.stage)

    detection = detections[0]
    try:
        if setup.grasp_method is GraspMethod.MODEL_FIT:
            source = fit_model_grasp(cloud, detection,
                                     setup.scan_poses[(len(setup.scan_poses) - 1) // 2].position)
        else:
            source = rank_grasp_candidates(cloud, detection, setup.camera_axis)
        plan = make_grasp_plan(source, detection)
    except (ValueError, RuntimeError):
        state = step(state, Event.ABORT)
        attempt.final_state = state
        cycle_time(attempt, setup.timing, len(setup.scan_poses), setup.scan_arm_moves)
        return attempt
    state = step(state, Event.PLAN_READY)
    attempt.stages_visited.append(state.stage)

    pepper_id = scene.peppers[0].id
    attempt.attach_outcome = attempt_attach(setup.attach_strategy, plan, scene, pepper_id, rng)
    state = step(state, Event.ATTACHED if attempt.attach_outcome.success
                 else Event.ATTACH_FAILED_CONTINUE)
    attempt.stages_visited.append(state.stage)

    # detachment runs irrespective of the attachment result
    attempt.detach_outcome = attempt_detach(
        setup.detach_strategy, plan, scene, pepper_id, rng,
        shared_error=attempt.attach_outcome.localization_error)
    state = step(state, Event.DETACHED) if attempt.detach_outcome.success \
        else step(state, Event.ABORT)
    attempt.final_state = state
    cycle_time(attempt, setup.timing, len(setup.scan_poses), setup.scan_arm_moves)
    return attempt


def run_trial(config: TrialConfig, workers: int = 1) -> TrialReport:
    """Simulate the configured trial and aggregate rates and timing.

    Deterministic for a fixed config seed: the report is byte-identical
    for any worker count.
    """
    if config.pepper_count < 1:
        raise EmptyTrialError("trial needs pepper_count >= 1")
    setup = _build_setup(config)
    indices = range(config.pepper_count)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            attempts = list(pool.map(
                lambda i: _simulate_pepper(setup, config.seed, i), indices,
                chunksize=max(1, config.pepper_count // (workers * 8))))
    else:
        attempts = [_simulate_pepper(setup, config.seed, i) for i in indices]

    n = len(attempts)
    attach_ok = sum(1 for a in attempts if a.attach_outcome and a.attach_outcome.success)
    detach_ok = sum(1 for a in attempts if a.detach_outcome and a.detach_outcome.success)
    both_ok = sum(1 for a in attempts
                  if a.attach_outcome and a.attach_outcome.success
                  and a.detach_outcome and a.detach_outcome.success)

    stage_totals: dict[str, float] = {s.value: 0.0 for s in
                                      (Stage.SCAN, Stage.DETECT, Stage.SELECT_GRASP,
                                       Stage.ATTACH, Stage.DETACH)}
    grand_total = 0.0
    failures: dict[str, int] = {}
    for a in attempts:
        for stage, dur in a.stage_durations.items():
            stage_totals[stage.value] += dur
        grand_total += a.total_time
        if a.attach_outcome is None and a.final_state.failed_at is not None:
            key = f"{a.final_state.failed_at.value}:NoCrop"
            failures[key] = failures.get(key, 0) + 1
        if a.attach_outcome is not None and not a.attach_outcome.success:
            key = f"Attach:{a.attach_outcome.reason.value}"
            failures[key] = failures.get(key, 0) + 1
        if a.detach_outcome is not None and not a.detach_outcome.success:
            key = f"Detach:{a.detach_outcome.reason.value}"
            failures[key] = failures.get(key, 0) + 1

    shares = {k: (v / grand_total if grand_total > 0 else 0.0)
              for k, v in stage_totals.items()}
    return TrialReport(
        cultivar=config.cultivar,
        scenario=config.scenario,
        n=n,
        seed=config.seed,
        scan_waypoints=len(setup.scan_poses),
        attach=_rate_summary(attach_ok, n),
        detach=_rate_summary(detach_ok, n),
        combined=_rate_summary(both_ok, n),
        mean_cycle_time=grand_total / n,
        stage_shares=shares,
        failure_counts=dict(sorted(failures.items())),
        attempts=attempts,
    )


# --- report serialization ---------------------------------------------------

REPORT_FORMAT = "harvestsim-report/1"


def report_to_dict(report: TrialReport) -> dict:
    def rate(r: RateSummary) -> dict:
        return {"successes": r.successes, "n": r.n, "rate": r.rate,
                "wilson95": [r.wilson_low, r.wilson_high]}

    return {
        "format": REPORT_FORMAT,
        "trial": {"cultivar": report.cultivar, "scenario": report.scenario,
                  "n": report.n, "seed": report.seed,
                  "scan_waypoints": report.scan_waypoints},
        "rates": {"attach": rate(report.attach), "detach": rate(report.detach),
                  "combined": rate(report.combined)},
        "timing": {"mean_cycle_time_s": report.mean_cycle_time,
                   "stage_shares": report.stage_shares},
        "failures": report.failure_counts,
    }


def report_to_json(report: TrialReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def write_report(report: TrialReport, path: str | Path) -> None:
    Path(path).write_text(report_to_json(report))


def report_from_dict(d: dict) -> TrialReport:
    if d.get("format") != REPORT_FORMAT:
        raise ValueError(f"unsupported report format {d.get('format')!r}")

    def rate(r: dict) -> RateSummary:
        return RateSummary(r["successes"], r["n"], r["rate"],
                           r["wilson95"][0], r["wilson95"][1])

    t = d["trial"]
    return TrialReport(
        cultivar=t["cultivar"], scenario=t["scenario"], n=t["n"], seed=t["seed"],
        scan_waypoints=t["scan_waypoints"],
        attach=rate(d["rates"]["attach"]), detach=rate(d["rates"]["detach"]),
        combined=rate(d["rates"]["combined"]),
        mean_cycle_time=d["timing"]["mean_cycle_time_s"],
        stage_shares=d["timing"]["stage_shares"],
        failure_counts=d["failures"],
    )


def read_report(path: str | Path) -> TrialReport:
    return report_from_dict(json.loads(Path(path).read_text()))


ATTEMPT_CSV_COLUMNS = (
    "pepper_id", "final_stage", "failed_at",
    "scan_s", "detect_s", "select_s", "attach_s", "detach_s", "total_s",
    "attach_success", "attach_reason", "detach_success", "detach_reason", "clean_break",
)


def write_attempts_csv(attempts: list[HarvestAttempt], path: str | Path) -> None:
    """One row per crop; columns are stable (see ATTEMPT_CSV_COLUMNS)."""
    def fmt(x: float) -> str:
        return f"{x:.3f}"

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ATTEMPT_CSV_COLUMNS)
        for a in attempts:
            dur = {s.value: a.stage_durations.get(s, 0.0)
                   for s in (Stage.SCAN, Stage.DETECT, Stage.SELECT_GRASP,
                             Stage.ATTACH, Stage.DETACH)}
            writer.writerow([
                a.pepper_id,
                a.final_state.stage.value,
                a.final_state.failed_at.value if a.final_state.failed_at else "",
                fmt(dur["Scan"]), fmt(dur["Detect"]), fmt(dur["SelectGrasp"]),
                fmt(dur["Attach"]), fmt(dur["Detach"]), fmt(a.total_time),
                int(a.attach_outcome.success) if a.attach_outcome else "",
                a.attach_outcome.reason.value if a.attach_outcome else "",
                int(a.detach_outcome.success) if a.detach_outcome else "",
                a.detach_outcome.reason.value if a.detach_outcome else "",
                int(a.detach_outcome.clean_break) if a.detach_outcome else "",
            ])


# --- reference comparison -----------------------------------------------------


@dataclass(frozen=True)
class MetricCheck:
    metric: str
    simulated: float
    reference: float | tuple[float, float]
    tolerance: float | None
    passed: bool


@dataclass(frozen=True)
class ComparisonResult:
    trial: str
    checks: tuple[MetricCheck, ...]

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)


def compare_to_reference(report: TrialReport, reference: ReferenceTrial,
                         tolerances: "float | dict[str, float]" = 0.03) -> ComparisonResult:
    """Check a trial report against a benchmark row.

    Rate metrics pass iff |simulated - reference| <= tolerance; the mean
    cycle time passes iff it falls inside the reference interval. The
    report's cultivar and scenario must match what the reference provides.
    """
    if report.cultivar.lower() != reference.cultivar.lower():
        raise ComparisonError(
            f"report cultivar {report.cultivar!r} does not match reference "
            f"{reference.cultivar!r}")

    def tol(metric: str) -> float:
        if isinstance(tolerances, dict):
            return float(tolerances.get(metric, 0.03))
        return float(tolerances)

    checks: list[MetricCheck] = []
    scenario = report.scenario.lower()
    if scenario == "modified":
        for metric, sim, ref in (
                ("attach", report.attach.rate, reference.modified_attach),
                ("detach", report.detach.rate, reference.modified_detach),
                ("combined", report.combined.rate, reference.modified_combined)):
            checks.append(MetricCheck(metric, sim, ref, tol(metric),
                                      abs(sim - ref) <= tol(metric)))
        if reference.harvest_time_range is not None:
            lo, hi = reference.harvest_time_range
            checks.append(MetricCheck("mean_cycle_time", report.mean_cycle_time,
                                      (lo, hi), None,
                                      lo <= report.mean_cycle_time <= hi))
    elif scenario == "unmodified":
        if reference.unmodified_combined is None:
            raise ComparisonError(
                f"reference {reference.name} has no unmodified benchmark")
        sim = report.combined.rate
        checks.append(MetricCheck("combined", sim, reference.unmodified_combined,
                                  tol("combined"),
                                  abs(sim - reference.unmodified_combined) <= tol("combined")))
    else:
        raise ComparisonError(f"unknown scenario {report.scenario!r}")
    return ComparisonResult(reference.name, tuple(checks))


# --- snap-pull bench ---------------------------------------------------------


@dataclass(frozen=True)
class SnapPullBench:
    n: int
    removed: int
    clean: int
    removal_rate: float
    clean_fraction_among_removed: float


def bench_snap_pull(n: int, seed: int, strategy: SnapPull | None = None,
                    diameter_mean: float = presets.BENCH_PEDUNCLE_DIAMETER_MEAN,
                    diameter_std: float = presets.BENCH_PEDUNCLE_DIAMETER_STD) -> SnapPullBench:
    """Monte-Carlo the snap-pull strategy over the calibrated peduncle
    diameter distribution."""
    if n < 1:
        raise EmptyTrialError("bench needs n >= 1")
    strategy = strategy or presets.BENCH_SNAP_PULL
    rng = np.random.default_rng(seed)
    diameters = sample_lognormal(rng, diameter_mean, diameter_std, size=n)
    clean = int(np.count_nonzero(diameters <= strategy.clean_diameter))
    removed = int(np.count_nonzero(diameters <= strategy.max_diameter))
    return SnapPullBench(
        n=n, removed=removed, clean=clean,
        removal_rate=removed / n,
        clean_fraction_among_removed=clean / removed if removed else 0.0)
