"""Synthetic trellis scenes and the simulated RGB-D observations of them.

The world frame is z-up. A scene is a planar crop wall: a finite trellis
rectangle, ellipsoidal sweet peppers hanging in a standoff band in front of
it, and elliptical leaf discs that occlude them. Geometry is deliberately
minimal; it only has to reproduce the occlusion, grasp-normal and
peduncle-offset phenomena the harvest models consume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from functools import cached_property
from pathlib import Path

import numpy as np

from .cloud import ColoredPointCloud
from .errors import ConfigurationError
from .geometry import (
    Pose,
    ellipsoid_normal,
    fibonacci_directions,
    orthonormal_basis,
    ray_disc,
    ray_ellipsoid,
    ray_plane,
    unit,
)

# Ripeness 0 maps to the green endpoint, 1 to the red endpoint. The
# endpoints are chosen so that the default red hue window (<= 15 deg)
# starts accepting fruit at ripeness ~0.7.
RIPE_COLOR = np.array([0.90, 0.10, 0.04])
UNRIPE_COLOR = np.array([0.05, 0.4333, 0.08])
LEAF_COLOR = np.array([0.10, 0.45, 0.12])
TRELLIS_COLOR = np.array([0.45, 0.40, 0.35])

WORLD_UP = np.array([0.0, 0.0, 1.0])


def ripeness_color(ripeness: float | np.ndarray) -> np.ndarray:
    """Linear green-to-red colour ramp over ripeness in [0, 1]."""
    r = np.clip(np.asarray(ripeness, dtype=float), 0.0, 1.0)
    return UNRIPE_COLOR + np.multiply.outer(r, RIPE_COLOR - UNRIPE_COLOR)


@dataclass(frozen=True)
class SizeDist:
    """Per-axis mean/std of ellipsoid semi-axes, meters."""

    mean: tuple[float, float, float]
    std: tuple[float, float, float]


@dataclass(frozen=True)
class PeduncleDist:
    length_mean: float
    length_std: float
    diameter_mean: float   # lognormal, parameterized by its mean/std
    diameter_std: float
    toughness_low: float = 0.2
    toughness_high: float = 0.8


@dataclass(frozen=True)
class RipenessDist:
    low: float = 0.8
    high: float = 1.0


@dataclass(frozen=True)
class LeafDist:
    """Placement and size of occluder leaves relative to their pepper."""

    radii_mean: tuple[float, float] = (0.055, 0.040)
    radii_std: float = 0.008
    lateral_std: float = 0.07      # spread along the row, m
    vertical_std: float = 0.07     # spread along trellis-up, m
    front_offset: tuple[float, float] = (0.02, 0.09)  # uniform, toward camera


@dataclass(frozen=True)
class SceneConfig:
    row_length: float = 1.0
    trellis_origin: tuple[float, float, float] = (0.0, 0.0, 1.0)
    trellis_normal: tuple[float, float, float] = (0.0, 1.0, 0.0)
    trellis_height: float = 1.2
    pepper_count: int = 1
    pepper_size_dist: SizeDist = SizeDist((0.035, 0.035, 0.050), (0.003, 0.003, 0.004))
    peduncle_dist: PeduncleDist = PeduncleDist(0.05, 0.008, 0.00705, 0.00951)
    leaf_density: float = 0.0
    leaf_dist: LeafDist = LeafDist()
    ripeness_dist: RipenessDist = RipenessDist()
    standoff_band: tuple[float, float] = (0.055, 0.11)
    height_band: tuple[float, float] = (-0.25, 0.25)  # relative to trellis origin, along up
    min_pepper_spacing: float = 0.16
    seed: int = 0
    cultivar_preset: str = "Custom"

    def validate(self) -> None:
        if self.pepper_count < 0:
            raise ConfigurationError("pepper_count must be >= 0")
        if self.leaf_density < 0:
            raise ConfigurationError("leaf_density must be >= 0")
        if min(self.pepper_size_dist.mean) <= 0:
            raise ConfigurationError("pepper size means must be > 0")
        if self.peduncle_dist.length_mean <= 0 or self.peduncle_dist.diameter_mean <= 0:
            raise ConfigurationError("peduncle distribution means must be > 0")
        if self.row_length <= 0 or self.trellis_height <= 0:
            raise ConfigurationError("trellis extents must be > 0")
        n = np.asarray(self.trellis_normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-6:
            raise ConfigurationError("trellis normal must be unit length")
        if self.cultivar_preset not in ("Claire", "Redject", "Custom"):
            raise ConfigurationError(f"unknown cultivar preset {self.cultivar_preset!r}")


@dataclass(frozen=True)
class Peduncle:
    attach_point: np.ndarray   # on the ellipsoid surface, top pole
    axis: np.ndarray           # unit, near trellis-up
    length: float
    diameter: float
    toughness: float


@dataclass(frozen=True)
class SweetPepper:
    id: int
    centroid: np.ndarray
    semi_axes: np.ndarray
    ripeness: float
    base_color: np.ndarray
    peduncle: Peduncle


@dataclass(frozen=True)
class Leaf:
    center: np.ndarray
    normal: np.ndarray
    radii: np.ndarray
    color: np.ndarray

    @cached_property
    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """In-plane axes the radii are measured along."""
        return orthonormal_basis(self.normal)


@dataclass(frozen=True)
class Trellis:
    """Finite rectangle: origin at the center, `length` along the row."""

    origin: np.ndarray
    normal: np.ndarray
    length: float
    height: float

    @cached_property
    def _axes(self) -> tuple[np.ndarray, np.ndarray]:
        up = unit(WORLD_UP - (WORLD_UP @ self.normal) * self.normal) \
            if abs(self.normal @ WORLD_UP) < 0.99 else np.array([1.0, 0.0, 0.0])
        return np.cross(up, self.normal), up

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """(row direction, up direction) spanning the trellis plane."""
        return self._axes


@dataclass(frozen=True)
class Scene:
    config: SceneConfig
    trellis: Trellis
    peppers: tuple[SweetPepper, ...]
    leaves: tuple[Leaf, ...]

    def pepper_by_id(self, pepper_id: int) -> SweetPepper:
        for p in self.peppers:
            if p.id == pepper_id:
                return p
        raise KeyError(f"no pepper with id {pepper_id}")


@dataclass(frozen=True)
class SensorModel:
    """Square-frustum ray-cast camera with range-dependent depth noise.

    sigma(z) = depth_noise_base + depth_noise_quad * z**2, applied along
    the ray. The single field of view applies to both axes.
    """

    h_rays: int = 48
    v_rays: int = 48
    fov: float = np.deg2rad(60.0)
    depth_noise_base: float = 0.0
    depth_noise_quad: float = 0.0
    color_noise_std: float = 0.0
    min_range: float = 0.05
    max_range: float = 3.0

    def __post_init__(self):
        if self.h_rays < 1 or self.v_rays < 1:
            raise ConfigurationError("ray counts must be >= 1")
        if self.depth_noise_base < 0 or self.depth_noise_quad < 0:
            raise ConfigurationError("noise coefficients must be >= 0")
        if not 0 < self.min_range < self.max_range:
            raise ConfigurationError("require 0 < min_range < max_range")

    @cached_property
    def _ray_dirs(self) -> np.ndarray:
        half = np.tan(self.fov / 2.0)
        us = np.linspace(-half, half, self.h_rays) if self.h_rays > 1 else np.zeros(1)
        vs = np.linspace(-half, half, self.v_rays) if self.v_rays > 1 else np.zeros(1)
        uu, vv = np.meshgrid(us, vs)
        d = np.column_stack([uu.ravel(), vv.ravel(), np.ones(uu.size)])
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def ray_directions(self) -> np.ndarray:
        """Unit ray directions in the camera frame (z forward), row-major."""
        return self._ray_dirs


def sample_lognormal(rng: np.random.Generator, mean: float, std: float, size=None):
    """Lognormal draw parameterized by its arithmetic mean and std."""
    var_ln = np.log(1.0 + (std / mean) ** 2)
    mu_ln = np.log(mean) - var_ln / 2.0
    return rng.lognormal(mu_ln, np.sqrt(var_ln), size)


def generate_scene(config: SceneConfig) -> Scene:
    """Sample a ground-truth scene; deterministic for a fixed config+seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    origin = np.asarray(config.trellis_origin, dtype=float)
    normal = unit(np.asarray(config.trellis_normal, dtype=float))
    trellis = Trellis(origin, normal, config.row_length, config.trellis_height)
    row, up = trellis.axes()

    sd = config.pepper_size_dist
    placed: list[np.ndarray] = []   # (along-row, along-up) coordinates
    peppers = []
    for i in range(config.pepper_count):
        semi = np.maximum(rng.normal(sd.mean, sd.std), 1e-3)
        margin = float(np.max(semi)) + 0.01
        span = max(config.row_length / 2.0 - margin, 1e-3)
        for _ in range(100):
            a = rng.uniform(-span, span)
            h = rng.uniform(*config.height_band)
            if all(np.hypot(a - q[0], h - q[1]) >= config.min_pepper_spacing for q in placed):
                break
        placed.append(np.array([a, h]))
        # centroid distance from the plane stays inside the standoff band
        s = rng.uniform(*config.standoff_band)
        centroid = origin + a * row + h * up + s * normal
        ripeness = float(rng.uniform(config.ripeness_dist.low, config.ripeness_dist.high))

        pd = config.peduncle_dist
        # top pole of the (axis-aligned) ellipsoid along trellis-up
        r_up = 1.0 / np.sqrt(float(np.sum((up / semi) ** 2)))
        attach = centroid + r_up * up
        tilt = abs(rng.normal(0.0, 0.08))
        azim = rng.uniform(0.0, 2.0 * np.pi)
        u1, u2 = orthonormal_basis(up)
        axis = unit(up * np.cos(tilt) + (u1 * np.cos(azim) + u2 * np.sin(azim)) * np.sin(tilt))
        length = max(float(rng.normal(pd.length_mean, pd.length_std)), 5e-3)
        diameter = float(sample_lognormal(rng, pd.diameter_mean, pd.diameter_std))
        diameter = min(diameter, 1.8 * float(np.min(semi)))
        toughness = float(rng.uniform(pd.toughness_low, pd.toughness_high))
        peppers.append(SweetPepper(
            id=i, centroid=centroid, semi_axes=semi, ripeness=ripeness,
            base_color=ripeness_color(ripeness),
            peduncle=Peduncle(attach, axis, length, diameter, toughness),
        ))

    leaves = []
    n_leaves = int(np.floor(config.leaf_density * config.pepper_count + 0.5))
    ld = config.leaf_dist
    for j in range(n_leaves):
        host = peppers[j % len(peppers)]
        center = (host.centroid
                  + rng.normal(0.0, ld.lateral_std) * row
                  + rng.normal(0.0, ld.vertical_std) * up
                  + rng.uniform(*ld.front_offset) * normal)
        leaf_normal = unit(normal + rng.normal(0.0, 0.35, size=3))
        radii = np.maximum(rng.normal(ld.radii_mean, ld.radii_std), 5e-3)
        color = np.clip(LEAF_COLOR + rng.normal(0.0, 0.02, size=3), 0.0, 1.0)
        leaves.append(Leaf(center, leaf_normal, radii, color))

    return Scene(config, trellis, tuple(peppers), tuple(leaves))


def _trellis_hits(scene: Scene, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    t = ray_plane(origin, dirs, scene.trellis.origin, scene.trellis.normal)
    ok = np.isfinite(t)
    if np.any(ok):
        pts = origin + dirs[ok] * t[ok, None] - scene.trellis.origin
        row, up = scene.trellis.axes()
        inside = (np.abs(pts @ row) <= scene.trellis.length / 2.0) \
            & (np.abs(pts @ up) <= scene.trellis.height / 2.0)
        t_ok = t[ok]
        t_ok[~inside] = np.inf
        t[ok] = t_ok
    return t


def render_pointcloud(scene: Scene, camera_pose: Pose, sensor: SensorModel,
                      rng: np.random.Generator | int | None = None) -> ColoredPointCloud:
    """Ray-cast the scene into a coloured point cloud.

    One point per ray that hits geometry within [min_range, max_range].
    Depth noise perturbs the hit distance along the ray; colour noise is
    additive and clamped. Normals are the noiseless ground-truth surface
    normals, oriented toward the camera.
    """
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(0 if rng is None else int(rng))
    origin = camera_pose.position
    dirs = sensor.ray_directions() @ camera_pose.rotation_matrix().T
    n = len(dirs)

    best_t = _trellis_hits(scene, origin, dirs)
    # kind: -1 none, 0 trellis, 1 + pepper index, 1 + n_peppers + leaf index
    kind = np.where(np.isfinite(best_t), 0, -1)
    for i, pep in enumerate(scene.peppers):
        t = ray_ellipsoid(origin, dirs, pep.centroid, pep.semi_axes)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        kind = np.where(closer, 1 + i, kind)
    for j, leaf in enumerate(scene.leaves):
        t = ray_disc(origin, dirs, leaf.center, leaf.normal, leaf.radii, leaf.basis)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        kind = np.where(closer, 1 + len(scene.peppers) + j, kind)

    hit = (kind >= 0) & (best_t >= sensor.min_range) & (best_t <= sensor.max_range)
    if not np.any(hit):
        return ColoredPointCloud.empty()
    t_hit = best_t[hit]
    d_hit = dirs[hit]
    kind = kind[hit]
    true_pts = origin + d_hit * t_hit[:, None]

    colors = np.empty((len(true_pts), 3))
    normals = np.empty((len(true_pts), 3))
    mask = kind == 0
    if np.any(mask):
        colors[mask] = TRELLIS_COLOR
        nrm = scene.trellis.normal
        normals[mask] = np.where((d_hit[mask] @ nrm)[:, None] < 0, nrm, -nrm)
    for i, pep in enumerate(scene.peppers):
        mask = kind == 1 + i
        if np.any(mask):
            colors[mask] = pep.base_color
            normals[mask] = ellipsoid_normal(true_pts[mask], pep.centroid, pep.semi_axes)
    for j, leaf in enumerate(scene.leaves):
        mask = kind == 1 + len(scene.peppers) + j
        if np.any(mask):
            colors[mask] = leaf.color
            normals[mask] = np.where((d_hit[mask] @ leaf.normal)[:, None] < 0,
                                     leaf.normal, -leaf.normal)

    if sensor.depth_noise_base > 0 or sensor.depth_noise_quad > 0:
        sigma = sensor.depth_noise_base + sensor.depth_noise_quad * t_hit ** 2
        t_hit = t_hit + rng.normal(0.0, 1.0, size=len(t_hit)) * sigma
    positions = origin + d_hit * t_hit[:, None]
    if sensor.color_noise_std > 0:
        colors = np.clip(colors + rng.normal(0.0, sensor.color_noise_std, colors.shape),
                         0.0, 1.0)
    return ColoredPointCloud(positions, colors, normals)


def occlusion_fraction(scene: Scene, pepper_id: int, camera_pose: Pose,
                       n_samples: int = 2048) -> float:
    """Fraction of sample rays toward the pepper's visible surface that are
    blocked by leaves or by other peppers."""
    pep = scene.pepper_by_id(pepper_id)
    cam = camera_pose.position
    pts = pep.centroid + fibonacci_directions(n_samples) * pep.semi_axes
    nrm = ellipsoid_normal(pts, pep.centroid, pep.semi_axes)
    visible = np.einsum("ij,ij->i", nrm, cam - pts) > 0
    pts = pts[visible]
    if len(pts) == 0:
        return 1.0
    dist = np.linalg.norm(pts - cam, axis=1)
    dirs = (pts - cam) / dist[:, None]

    blocked = np.zeros(len(pts), dtype=bool)
    for other in scene.peppers:
        if other.id == pepper_id:
            continue
        t = ray_ellipsoid(cam, dirs, other.centroid, other.semi_axes)
        blocked |= t < dist - 1e-9
    for leaf in scene.leaves:
        t = ray_disc(cam, dirs, leaf.center, leaf.normal, leaf.radii, leaf.basis)
        blocked |= t < dist - 1e-9
    return float(np.count_nonzero(blocked)) / float(len(pts))


# --- serialization ------------------------------------------------------
#
# Scenes are stored as a single JSON document. Reading and re-writing a
# file produced by write_scene is byte-identical (floats use shortest
# round-trip repr, key order is fixed by construction).

SCENE_FORMAT = "harvestsim-scene/1"


def _vec(x) -> list[float]:
    return [float(v) for v in np.asarray(x).ravel()]


def scene_to_dict(scene: Scene) -> dict:
    return {
        "format": SCENE_FORMAT,
        "config": _config_to_dict(scene.config),
        "trellis": {
            "origin": _vec(scene.trellis.origin),
            "normal": _vec(scene.trellis.normal),
            "length": scene.trellis.length,
            "height": scene.trellis.height,
        },
        "peppers": [{
            "id": p.id,
            "centroid": _vec(p.centroid),
            "semi_axes": _vec(p.semi_axes),
            "ripeness": p.ripeness,
            "base_color": _vec(p.base_color),
            "peduncle": {
                "attach_point": _vec(p.peduncle.attach_point),
                "axis": _vec(p.peduncle.axis),
                "length": p.peduncle.length,
                "diameter": p.peduncle.diameter,
                "toughness": p.peduncle.toughness,
            },
        } for p in scene.peppers],
        "leaves": [{
            "center": _vec(l.center),
            "normal": _vec(l.normal),
            "radii": _vec(l.radii),
            "color": _vec(l.color),
        } for l in scene.leaves],
    }


def _config_to_dict(config: SceneConfig) -> dict:
    d = asdict(config)
    for key in ("trellis_origin", "trellis_normal", "standoff_band", "height_band"):
        d[key] = [float(v) for v in d[key]]
    d["pepper_size_dist"] = {"mean": _vec(config.pepper_size_dist.mean),
                             "std": _vec(config.pepper_size_dist.std)}
    d["leaf_dist"]["radii_mean"] = _vec(config.leaf_dist.radii_mean)
    d["leaf_dist"]["front_offset"] = _vec(config.leaf_dist.front_offset)
    return d


def _config_from_dict(d: dict) -> SceneConfig:
    kw = dict(d)
    kw["pepper_size_dist"] = SizeDist(tuple(d["pepper_size_dist"]["mean"]),
                                      tuple(d["pepper_size_dist"]["std"]))
    kw["peduncle_dist"] = PeduncleDist(**d["peduncle_dist"])
    kw["ripeness_dist"] = RipenessDist(**d["ripeness_dist"])
    ld = dict(d["leaf_dist"])
    ld["radii_mean"] = tuple(ld["radii_mean"])
    ld["front_offset"] = tuple(ld["front_offset"])
    kw["leaf_dist"] = LeafDist(**ld)
    for key in ("trellis_origin", "trellis_normal", "standoff_band", "height_band"):
        kw[key] = tuple(kw[key])
    return SceneConfig(**kw)


def scene_from_dict(d: dict) -> Scene:
    if d.get("format") != SCENE_FORMAT:
        raise ValueError(f"unsupported scene format {d.get('format')!r}")
    tr = d["trellis"]
    trellis = Trellis(np.array(tr["origin"]), np.array(tr["normal"]),
                      tr["length"], tr["height"])
    peppers = tuple(
        SweetPepper(
            id=p["id"], centroid=np.array(p["centroid"]),
            semi_axes=np.array(p["semi_axes"]), ripeness=p["ripeness"],
            base_color=np.array(p["base_color"]),
            peduncle=Peduncle(np.array(p["peduncle"]["attach_point"]),
                              np.array(p["peduncle"]["axis"]),
                              p["peduncle"]["length"], p["peduncle"]["diameter"],
                              p["peduncle"]["toughness"]))
        for p in d["peppers"])
    leaves = tuple(Leaf(np.array(l["center"]), np.array(l["normal"]),
                        np.array(l["radii"]), np.array(l["color"]))
                   for l in d["leaves"])
    return Scene(_config_from_dict(d["config"]), trellis, peppers, leaves)


def write_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")


def read_scene(path: str | Path) -> Scene:
    return scene_from_dict(json.loads(Path(path).read_text()))


def read_scene_config(path: str | Path) -> SceneConfig:
    """Load a bare SceneConfig from JSON (same schema as the scene file's
    `config` block)."""
    d = json.loads(Path(path).read_text())
    if "config" in d:
        d = d["config"]
    return _config_from_dict(d)
