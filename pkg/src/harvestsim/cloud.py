"""Coloured point clouds and the ASCII PLY subset used for interchange."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

_PLY_PROPS = ("x", "y", "z", "red", "green", "blue")


@dataclass(frozen=True, eq=False)
class ColoredPointCloud:
    """Parallel arrays of positions (m), RGB colours in [0,1] and optional
    unit surface normals."""

    positions: np.ndarray
    colors: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        col = np.asarray(self.colors, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        if len(pos) != len(col):
            raise ValueError("positions and colors must have equal length")
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if len(nrm) != len(pos):
                raise ValueError("normals must match positions in length")
            object.__setattr__(self, "normals", nrm)

    def __len__(self) -> int:
        return len(self.positions)

    @staticmethod
    def empty() -> "ColoredPointCloud":
        return ColoredPointCloud(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3)))

    @staticmethod
    def merge(clouds: "list[ColoredPointCloud]") -> "ColoredPointCloud":
        """Concatenate clouds; normals survive only if every part has them."""
        if not clouds:
            return ColoredPointCloud.empty()
        pos = np.concatenate([c.positions for c in clouds])
        col = np.concatenate([c.colors for c in clouds])
        nrm = None
        if all(c.normals is not None for c in clouds):
            nrm = np.concatenate([c.normals for c in clouds])
        return ColoredPointCloud(pos, col, nrm)


def write_ply(cloud: ColoredPointCloud, path: str | Path) -> None:
    """ASCII PLY: header then one `x y z r g b` line per point, 6 decimals.

    Normals are not part of the interchange format and are dropped.
    """
    lines = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}"]
    lines += [f"property float {name}" for name in _PLY_PROPS]
    lines.append("end_header")
    for p, c in zip(cloud.positions, cloud.colors):
        lines.append("%.6f %.6f %.6f %.6f %.6f %.6f" % (p[0], p[1], p[2], c[0], c[1], c[2]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_ply(path: str | Path) -> ColoredPointCloud:
    text = Path(path).read_text().splitlines()
    try:
        end = text.index("end_header")
    except ValueError:
        raise ValueError(f"{path}: not a PLY file (missing end_header)") from None
    n = 0
    for line in text[:end]:
        if line.startswith("element vertex"):
            n = int(line.split()[-1])
    body = text[end + 1:end + 1 + n]
    if len(body) != n:
        raise ValueError(f"{path}: expected {n} vertex lines, found {len(body)}")
    if n == 0:
        return ColoredPointCloud(np.zeros((0, 3)), np.zeros((0, 3)))
    data = np.array([[float(tok) for tok in line.split()] for line in body])
    if data.shape[1] != 6:
        raise ValueError(f"{path}: expected 6 values per vertex line")
    return ColoredPointCloud(data[:, :3], data[:, 3:])
