"""Colour-based crop detection and Euclidean cluster segmentation.

Detection is a pure HSV threshold over the cloud; segmentation is
single-linkage clustering of the selected points. Both are deterministic
and order-stable so downstream reports are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .cloud import ColoredPointCloud
from .errors import ConfigurationError

# Red fruit defaults: hue wraps around 0 degrees.
DEFAULT_HUE_INTERVALS = ((350.0, 360.0), (0.0, 15.0))


def rgb_to_hsv(colors: np.ndarray) -> np.ndarray:
    """Vectorized RGB -> (hue deg [0,360), saturation, value)."""
    c = np.asarray(colors, dtype=float).reshape(-1, 3)
    maxc = c.max(axis=1)
    minc = c.min(axis=1)
    delta = maxc - minc
    v = maxc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)

    h = np.zeros(len(c))
    nz = delta > 0
    r, g, b = c[:, 0], c[:, 1], c[:, 2]
    rc = np.where(nz, (maxc - r) / np.where(nz, delta, 1.0), 0.0)
    gc = np.where(nz, (maxc - g) / np.where(nz, delta, 1.0), 0.0)
    bc = np.where(nz, (maxc - b) / np.where(nz, delta, 1.0), 0.0)
    h = np.where(r == maxc, bc - gc, h)
    h = np.where((g == maxc) & (r != maxc), 2.0 + rc - bc, h)
    h = np.where((b == maxc) & (r != maxc) & (g != maxc), 4.0 + gc - rc, h)
    h = (h / 6.0) % 1.0
    h = np.where(nz, h, 0.0)
    return np.column_stack([h * 360.0, s, v])


@dataclass(frozen=True)
class ColorModel:
    """Hue intervals in degrees (wrap-around allowed) plus saturation and
    value floors."""

    hue_intervals: tuple[tuple[float, float], ...] = DEFAULT_HUE_INTERVALS
    min_saturation: float = 0.4
    min_value: float = 0.2

    def __post_init__(self):
        if not self.hue_intervals:
            raise ConfigurationError("at least one hue interval is required")
        for lo, hi in self.hue_intervals:
            if not (0.0 <= lo <= 360.0 and 0.0 <= hi <= 360.0):
                raise ConfigurationError("hue bounds must lie in [0, 360]")
        if not (0.0 <= self.min_saturation <= 1.0 and 0.0 <= self.min_value <= 1.0):
            raise ConfigurationError("saturation/value floors must lie in [0, 1]")

    def hue_mask(self, hue: np.ndarray) -> np.ndarray:
        mask = np.zeros(len(hue), dtype=bool)
        for lo, hi in self.hue_intervals:
            if lo <= hi:
                mask |= (hue >= lo) & (hue <= hi)
            else:  # wrap-around interval, e.g. (350, 15)
                mask |= (hue >= lo) | (hue <= hi)
        return mask


def detect_color(cloud: ColoredPointCloud, model: ColorModel) -> np.ndarray:
    """Indices (ascending) of points passing all three HSV thresholds."""
    if len(cloud) == 0:
        return np.zeros(0, dtype=int)
    hsv = rgb_to_hsv(cloud.colors)
    mask = model.hue_mask(hsv[:, 0]) \
        & (hsv[:, 1] >= model.min_saturation) \
        & (hsv[:, 2] >= model.min_value)
    return np.nonzero(mask)[0]


@dataclass(frozen=True)
class PepperDetection:
    point_indices: np.ndarray   # into the source cloud, ascending
    centroid: np.ndarray
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    point_count: int


class _UnionFind:
    """Disjoint sets with path compression, for the radius graph."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[rj] = ri


def segment_clusters(cloud: ColoredPointCloud, indices: np.ndarray,
                     radius: float, min_points: int) -> list[PepperDetection]:
    """Single-linkage Euclidean clusters of the selected points.

    Two points are connected iff their distance is <= radius; clusters
    smaller than min_points are discarded. Results are sorted by
    descending size, ties by ascending centroid x.
    """
    if radius <= 0:
        raise ConfigurationError("radius must be > 0")
    if min_points < 1:
        raise ConfigurationError("min_points must be >= 1")
    indices = np.asarray(indices, dtype=int)
    if len(indices) == 0:
        return []
    pts = cloud.positions[indices]
    tree = cKDTree(pts)
    uf = _UnionFind(len(pts))
    for i, j in tree.query_pairs(radius):
        uf.union(i, j)
    labels = np.fromiter((uf.find(i) for i in range(len(pts))), dtype=int, count=len(pts))

    detections = []
    for root in np.unique(labels):
        member = labels == root
        count = int(member.sum())
        if count < min_points:
            continue
        sub = pts[member]
        detections.append(PepperDetection(
            point_indices=np.sort(indices[member]),
            centroid=sub.mean(axis=0),
            bbox_min=sub.min(axis=0),
            bbox_max=sub.max(axis=0),
            point_count=count,
        ))
    detections.sort(key=lambda d: (-d.point_count, float(d.centroid[0])))
    return detections


def detections_to_json(detections: list[PepperDetection]) -> str:
    doc = {"detections": [{
        "id": i,
        "centroid": [float(v) for v in d.centroid],
        "bbox_min": [float(v) for v in d.bbox_min],
        "bbox_max": [float(v) for v in d.bbox_max],
        "point_count": d.point_count,
    } for i, d in enumerate(detections)]}
    return json.dumps(doc, indent=2) + "\n"


def write_detections(detections: list[PepperDetection], path: str | Path) -> None:
    Path(path).write_text(detections_to_json(detections))
