"""Small 3D toolbox: vectors, quaternions, poses and ray intersections.

Everything operates on plain numpy arrays in SI units (meters, radians).
Quaternions are scalar-first [w, x, y, z] and kept unit length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS = 1e-12


def unit(v: np.ndarray) -> np.ndarray:
    """Normalize a vector; raises on (near) zero input."""
    v = np.asarray(v, dtype=float)
    n = float(np.sqrt(v @ v)) if v.ndim == 1 else float(np.linalg.norm(v))
    if n < _EPS:
        raise ValueError("cannot normalize a zero-length vector")
    return v / n


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return unit(np.asarray(q, dtype=float))


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = unit(axis)
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis))


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion q. v may be (3,) or (N, 3)."""
    return np.asarray(v, dtype=float) @ quat_to_matrix(q).T


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (Shepperd's method, w >= 0)."""
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def rotation_vector(m: np.ndarray) -> np.ndarray:
    """Axis * angle vector of a rotation matrix (angle in [0, pi])."""
    cos_a = np.clip((np.trace(m) - 1.0) * 0.5, -1.0, 1.0)
    angle = np.arccos(cos_a)
    if angle < 1e-9:
        return np.zeros(3)
    axis_raw = np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    sin_a = np.linalg.norm(axis_raw) * 0.5
    if sin_a < 1e-9:
        # angle near pi: recover axis from the symmetric part
        d = (np.diag(m) + 1.0) * 0.5
        axis = unit(np.sqrt(np.clip(d, 0.0, None)))
        # fix signs from off-diagonal terms
        if m[0, 1] + m[1, 0] < 0:
            axis[1] = -axis[1]
        if m[0, 2] + m[2, 0] < 0:
            axis[2] = -axis[2]
        return axis * angle
    return axis_raw / (2.0 * sin_a) * angle


def orthonormal_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic in-plane axes (u, v) for a plane with the given normal."""
    n = unit(normal)
    helper = np.array([0.0, 0.0, 1.0])
    if abs(float(n @ helper)) > 0.9:
        helper = np.array([1.0, 0.0, 0.0])
    u = unit(np.cross(helper, n))
    v = np.cross(n, u)
    return u, v


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: position plus unit quaternion orientation."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        q = np.asarray(self.orientation, dtype=float).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValueError("orientation quaternion must be unit length")
        object.__setattr__(self, "orientation", q / np.linalg.norm(q))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def z_axis(self) -> np.ndarray:
        """Third body axis in world coordinates (tool/optical axis)."""
        return self.rotation_matrix()[:, 2]

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.rotation_matrix().T + self.position

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other's frame: world_T_self * self_T_other."""
        return Pose(self.position + quat_rotate(self.orientation, other.position),
                    quat_normalize(quat_mul(self.orientation, other.orientation)))

    def inverse(self) -> "Pose":
        qi = quat_conjugate(self.orientation)
        return Pose(-quat_rotate(qi, self.position), qi)

    def almost_equal(self, other: "Pose", pos_tol: float = 1e-9, ang_tol: float = 1e-9) -> bool:
        dq = quat_mul(quat_conjugate(self.orientation), other.orientation)
        ang = 2.0 * np.arccos(np.clip(abs(dq[0]), -1.0, 1.0))
        return bool(np.linalg.norm(self.position - other.position) <= pos_tol and ang <= ang_tol)


def frame_from_z(z_axis: np.ndarray, up_hint: np.ndarray = (0.0, 0.0, 1.0)) -> np.ndarray:
    """Rotation matrix whose third column is z_axis, roll fixed by up_hint."""
    z = unit(z_axis)
    hint = np.asarray(up_hint, dtype=float)
    x = np.cross(hint, z)
    if np.linalg.norm(x) < 1e-6:
        fallback = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        x = np.cross(fallback, z)
    x = unit(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def look_at(position: np.ndarray, target: np.ndarray,
            up_hint: np.ndarray = (0.0, 0.0, 1.0)) -> Pose:
    """Pose at `position` with its z axis pointed at `target`."""
    position = np.asarray(position, dtype=float)
    z = unit(np.asarray(target, dtype=float) - position)
    return Pose(position, quat_from_matrix(frame_from_z(z, up_hint)))


# --- ray intersections -------------------------------------------------
#
# All take a single origin (3,) and directions (N, 3) of unit rays and
# return hit distances (N,), np.inf where there is no hit in front of
# the origin.


def ray_plane(origin: np.ndarray, dirs: np.ndarray, point: np.ndarray,
              normal: np.ndarray) -> np.ndarray:
    dirs = np.atleast_2d(dirs)
    denom = dirs @ np.asarray(normal, dtype=float)
    t = np.full(len(dirs), np.inf)
    ok = np.abs(denom) > _EPS
    t_ok = ((np.asarray(point, dtype=float) - origin) @ normal) / denom[ok]
    t[ok] = np.where(t_ok > _EPS, t_ok, np.inf)
    return t


def ray_ellipsoid(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray,
                  semi_axes: np.ndarray) -> np.ndarray:
    """Nearest positive intersection with an axis-aligned ellipsoid."""
    dirs = np.atleast_2d(dirs)
    inv = 1.0 / np.asarray(semi_axes, dtype=float)
    o = (origin - center) * inv
    d = dirs * inv
    a = np.einsum("ij,ij->i", d, d)
    b = d @ o
    c = float(o @ o) - 1.0
    disc = b * b - a * c
    t = np.full(len(dirs), np.inf)
    hit = disc >= 0.0
    if np.any(hit):
        sq = np.sqrt(disc[hit])
        t0 = (-b[hit] - sq) / a[hit]
        t1 = (-b[hit] + sq) / a[hit]
        near = np.where(t0 > _EPS, t0, np.where(t1 > _EPS, t1, np.inf))
        t[hit] = near
    return t


def ray_disc(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray,
             normal: np.ndarray, radii: np.ndarray,
             basis: "tuple[np.ndarray, np.ndarray] | None" = None) -> np.ndarray:
    """Intersection with an elliptical disc.

    The radii axes default to orthonormal_basis(normal); pass a
    precomputed basis when calling repeatedly for the same disc.
    """
    dirs = np.atleast_2d(dirs)
    t = ray_plane(origin, dirs, center, normal)
    ok = np.isfinite(t)
    if np.any(ok):
        pts = origin + dirs[ok] * t[ok, None] - np.asarray(center, dtype=float)
        u, v = basis if basis is not None else orthonormal_basis(normal)
        a = (pts @ u) / radii[0]
        b = (pts @ v) / radii[1]
        inside = a * a + b * b <= 1.0
        t_ok = t[ok]
        t_ok[~inside] = np.inf
        t[ok] = t_ok
    return t


def ellipsoid_normal(points: np.ndarray, center: np.ndarray,
                     semi_axes: np.ndarray) -> np.ndarray:
    """Outward unit surface normals at points on an axis-aligned ellipsoid."""
    pts = np.atleast_2d(points)
    g = (pts - center) / np.square(np.asarray(semi_axes, dtype=float))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def nearest_point_on_ellipsoid(center: np.ndarray, semi_axes: np.ndarray,
                               point: np.ndarray) -> np.ndarray:
    """Closest surface point of an axis-aligned ellipsoid to an external point.

    Solves sum_i (a_i^2 p_i / (t + a_i^2))^2 = 1 for the unique root with
    t > -min(a_i^2) by bisection; the projection is then componentwise
    q_i = a_i^2 p_i / (t + a_i^2) about the center.
    """
    a2 = np.square(np.asarray(semi_axes, dtype=float))
    p = np.asarray(point, dtype=float) - center
    if np.all(np.abs(p) < _EPS):
        q = np.zeros(3)
        q[0] = semi_axes[0]
        return center + q

    def f(t: float) -> float:
        return float(np.sum(np.square(a2 * p / (t + a2))) - 1.0)

    lo = -float(np.min(a2)) + 1e-12
    hi = max(float(np.linalg.norm(p)) * float(np.max(np.sqrt(a2))), 1.0)
    while f(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return center + a2 * p / (t + a2)


def fibonacci_directions(n: int) -> np.ndarray:
    """n near-uniform unit directions on the sphere (deterministic)."""
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
