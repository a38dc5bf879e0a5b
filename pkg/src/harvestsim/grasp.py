"""Grasp and cut pose selection for a single crop detection.

Two selection families are provided: a surface heuristic that scores every
detected point from its normal, local flatness and centrality, and a model
fit that recovers an axis-aligned ellipsoid from the detection and grasps
its camera-facing surface point. Either route feeds make_grasp_plan, which
adds the cut pose at a fixed offset above the detection. That offset is an
assumption, not a measurement, and the error it induces against the true
peduncle is the main driver of simulated cut misses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .cloud import ColoredPointCloud
from .errors import FitFailureError, InsufficientDataError
from .geometry import Pose, frame_from_z, nearest_point_on_ellipsoid, quat_from_matrix, unit
from .perception import PepperDetection

DEFAULT_WEIGHTS = (0.6, 0.2, 0.2)
DEFAULT_PEDUNCLE_OFFSET = 0.03   # m above the detection bbox top
FLATNESS_RADIUS = 0.015          # m neighbourhood for normal dispersion


class GraspMethod(Enum):
    SURFACE_HEURISTIC = "SurfaceHeuristic"
    MODEL_FIT = "ModelFit"


@dataclass(frozen=True)
class GraspCandidate:
    point: np.ndarray
    outward_normal: np.ndarray
    score: float


@dataclass(frozen=True)
class GraspPlan:
    grasp_pose: Pose            # z axis = approach = -outward normal
    cut_pose: Pose              # z axis = blade edge direction, horizontal
    alternatives: tuple[GraspCandidate, ...]
    method: GraspMethod


@dataclass(frozen=True)
class EllipsoidFit:
    center: np.ndarray
    semi_axes: np.ndarray
    residual_rms: float         # rms of the normalized radial residual


@dataclass(frozen=True)
class ModelFitGrasp:
    fit: EllipsoidFit
    candidate: GraspCandidate


def rank_grasp_candidates(cloud: ColoredPointCloud, detection: PepperDetection,
                          camera_axis: np.ndarray,
                          weights: tuple[float, float, float] = DEFAULT_WEIGHTS,
                          plane_normal: np.ndarray | None = None,
                          flatness_radius: float = FLATNESS_RADIUS
                          ) -> list[GraspCandidate]:
    """Score every detection point and return candidates best first.

    score = w1 * max(0, cos angle(normal, toward-camera))
          + w2 * flatness
          + w3 * centrality

    Flatness is the mean resultant length of the unit normals within
    flatness_radius (1 = locally planar, 0 = fully dispersed). Centrality
    is 1 minus the planar distance to the detection centroid, normalized
    by the bbox half-diagonal and measured in the crop-wall plane
    (plane_normal defaults to the camera axis). Ties break toward the
    lower point index.
    """
    if detection.point_count == 0 or len(detection.point_indices) == 0:
        raise InsufficientDataError("detection has no points")
    if cloud.normals is None:
        raise ValueError("cloud has no normals; render with normals enabled")
    w1, w2, w3 = weights
    pts = cloud.positions[detection.point_indices]
    nrm = cloud.normals[detection.point_indices]

    toward_cam = -unit(np.asarray(camera_axis, dtype=float))
    facing = np.clip(nrm @ toward_cam, 0.0, None)

    tree = cKDTree(pts)
    pairs = tree.query_pairs(flatness_radius, output_type="ndarray")
    sums = nrm.copy()
    counts = np.ones(len(pts))
    if len(pairs):
        np.add.at(sums, pairs[:, 0], nrm[pairs[:, 1]])
        np.add.at(sums, pairs[:, 1], nrm[pairs[:, 0]])
        np.add.at(counts, pairs[:, 0], 1.0)
        np.add.at(counts, pairs[:, 1], 1.0)
    flatness = np.linalg.norm(sums, axis=1) / counts

    pn = unit(np.asarray(plane_normal, dtype=float)) if plane_normal is not None \
        else unit(np.asarray(camera_axis, dtype=float))
    offsets = pts - detection.centroid
    planar = offsets - np.outer(offsets @ pn, pn)
    half_diag = 0.5 * float(np.linalg.norm(detection.bbox_max - detection.bbox_min))
    if half_diag > 0:
        centrality = np.clip(1.0 - np.linalg.norm(planar, axis=1) / half_diag, 0.0, 1.0)
    else:
        centrality = np.ones(len(pts))

    scores = w1 * facing + w2 * flatness + w3 * centrality
    order = np.lexsort((np.arange(len(pts)), -scores))
    nrm_unit = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    return [GraspCandidate(pts[i], nrm_unit[i], float(scores[i])) for i in order]


def fit_ellipsoid(points: np.ndarray) -> EllipsoidFit:
    """Least-squares axis-aligned ellipsoid through the given points.

    Solves A x^2 + B y^2 + C z^2 + D x + E y + F z = 1 and converts back to
    center/semi-axes. Raises when there are fewer than 10 points, when the
    point configuration is rank deficient, or when the quadric is not an
    ellipsoid.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 10:
        raise InsufficientDataError(f"need >= 10 points for an ellipsoid fit, got {len(pts)}")
    design = np.column_stack([pts ** 2, pts])
    if np.linalg.matrix_rank(design) < 6:
        raise FitFailureError("degenerate point configuration (rank-deficient fit)")
    coef, *_ = np.linalg.lstsq(design, np.ones(len(pts)), rcond=None)
    quad, lin = coef[:3], coef[3:]
    if np.any(quad <= 0):
        raise FitFailureError("fit did not produce an ellipsoid (non-positive quadratic term)")
    center = -lin / (2.0 * quad)
    gamma = 1.0 + float(np.sum(lin ** 2 / (4.0 * quad)))
    if gamma <= 0:
        raise FitFailureError("fit did not produce an ellipsoid (negative radius term)")
    semi = np.sqrt(gamma / quad)
    radial = np.sqrt(np.sum(((pts - center) / semi) ** 2, axis=1))
    return EllipsoidFit(center, semi, float(np.sqrt(np.mean((radial - 1.0) ** 2))))


def fit_model_grasp(cloud: ColoredPointCloud, detection: PepperDetection,
                    camera_position: np.ndarray) -> ModelFitGrasp:
    """Ellipsoid fit of the detection plus the grasp point nearest the camera."""
    pts = cloud.positions[detection.point_indices]
    fit = fit_ellipsoid(pts)
    grasp_pt = nearest_point_on_ellipsoid(fit.center, fit.semi_axes,
                                          np.asarray(camera_position, dtype=float))
    normal = unit((grasp_pt - fit.center) / fit.semi_axes ** 2)
    return ModelFitGrasp(fit, GraspCandidate(grasp_pt, normal, 1.0))


def make_grasp_plan(source: "list[GraspCandidate] | ModelFitGrasp",
                    detection: PepperDetection,
                    peduncle_offset: float = DEFAULT_PEDUNCLE_OFFSET,
                    trellis_up: np.ndarray = (0.0, 0.0, 1.0),
                    trellis_normal: np.ndarray = (0.0, 1.0, 0.0)) -> GraspPlan:
    """Assemble the two-pose plan: suction grasp plus blade cut.

    The grasp pose comes from the best candidate, approach axis opposite
    its outward normal. The cut pose sits peduncle_offset above the
    detection bbox top-centre along trellis-up, blade edge horizontal and
    parallel to the crop wall. No peduncle is ever observed; the offset is
    a fixed assumption.
    """
    if isinstance(source, ModelFitGrasp):
        candidates: list[GraspCandidate] = [source.candidate]
        method = GraspMethod.MODEL_FIT
    else:
        candidates = list(source)
        method = GraspMethod.SURFACE_HEURISTIC
    if not candidates:
        raise ValueError("cannot plan a grasp without candidates")

    up = unit(np.asarray(trellis_up, dtype=float))
    normal = unit(np.asarray(trellis_normal, dtype=float))
    best = candidates[0]
    approach = -best.outward_normal
    grasp_pose = Pose(best.point, quat_from_matrix(frame_from_z(approach, up)))

    center = 0.5 * (detection.bbox_min + detection.bbox_max)
    half = 0.5 * (detection.bbox_max - detection.bbox_min)
    top_center = center + float(half @ np.abs(up)) * up
    cut_position = top_center + peduncle_offset * up
    cut_axis = unit(np.cross(up, normal))
    cut_pose = Pose(cut_position, quat_from_matrix(frame_from_z(cut_axis, up)))
    return GraspPlan(grasp_pose, cut_pose, tuple(candidates), method)


def plan_to_json(plan: GraspPlan) -> str:
    def pose_dict(p: Pose) -> dict:
        return {"position": [float(v) for v in p.position],
                "quaternion_wxyz": [float(v) for v in p.orientation]}

    doc = {
        "method": plan.method.value,
        "grasp_pose": pose_dict(plan.grasp_pose),
        "cut_pose": pose_dict(plan.cut_pose),
        "alternatives": [{
            "point": [float(v) for v in c.point],
            "outward_normal": [float(v) for v in c.outward_normal],
            "score": c.score,
        } for c in plan.alternatives],
    }
    return json.dumps(doc, indent=2) + "\n"


def write_plan(plan: GraspPlan, path: str | Path) -> None:
    Path(path).write_text(plan_to_json(plan))
