"""Synthetic 3D world and simulated depth camera.

The world is a ground plane at z=0 plus axis-aligned boxes (and optional
raw triangles). The depth camera casts a grid of rays spanning its field
of view and reports the nearest hit range per ray; ranges outside the
sensor's [min_range, max_range] window come back as no-return (inf).
"""

import math
import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

NO_RETURN = np.inf

# Sanity bound for world geometry; keeps bad files from creating
# kilometre-scale maps.
WORLD_BOUND = 1000.0


class WorldError(ValueError):
    """World file failed to parse or validate."""


@dataclass
class Box:
    """Axis-aligned box obstacle, corners in meters."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        self.min_corner = np.asarray(self.min_corner, dtype=float)
        self.max_corner = np.asarray(self.max_corner, dtype=float)
        if not np.all(self.min_corner < self.max_corner):
            raise WorldError(f"box min {self.min_corner} must be < max "
                             f"{self.max_corner} on every axis")
        if np.max(np.abs(self.min_corner)) > WORLD_BOUND or \
                np.max(np.abs(self.max_corner)) > WORLD_BOUND:
            raise WorldError("box outside the supported world bounds")

    def surface_distance(self, p: np.ndarray) -> float:
        """Unsigned distance from a point to the box surface."""
        q = np.maximum(self.min_corner - p, p - self.max_corner)
        outside = float(np.linalg.norm(np.maximum(q, 0.0)))
        if outside > 0.0:
            return outside
        return float(-q.max())  # interior: depth to the nearest face

    def exterior_distance(self, p: np.ndarray) -> float:
        """Distance to the box from outside; zero on or inside it."""
        q = np.maximum(self.min_corner - p, p - self.max_corner)
        return float(np.linalg.norm(np.maximum(q, 0.0)))


@dataclass
class WorldModel:
    """Obstacle set over an implicit ground plane at z = 0."""

    obstacles: List[Box] = field(default_factory=list)
    triangles: List[np.ndarray] = field(default_factory=list)
    name: str = "empty"

    def surface_distance(self, p: np.ndarray) -> float:
        """Distance to the nearest mapped surface (boxes or ground)."""
        d = abs(float(p[2]))  # ground plane
        for box in self.obstacles:
            d = min(d, box.surface_distance(p))
        return d

    def obstacle_clearance(self, p: np.ndarray) -> float:
        """Distance to the nearest obstacle box; ground excluded."""
        if not self.obstacles:
            return math.inf
        return min(box.exterior_distance(p) for box in self.obstacles)


def load_world(path) -> WorldModel:
    """Parse a line-oriented world file.

    Grammar: blank lines and `#` comments ignored; each remaining line is
    `box x0 y0 z0 x1 y1 z1` in meters. The ground plane is implicit.
    """
    boxes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] != "box":
                raise WorldError(f"{path}:{lineno}: unknown directive "
                                 f"{parts[0]!r}")
            if len(parts) != 7:
                raise WorldError(f"{path}:{lineno}: box needs 6 numbers, "
                                 f"got {len(parts) - 1}")
            try:
                vals = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise WorldError(f"{path}:{lineno}: {exc}") from None
            try:
                boxes.append(Box(np.array(vals[:3]), np.array(vals[3:])))
            except WorldError as exc:
                raise WorldError(f"{path}:{lineno}: {exc}") from None
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return WorldModel(obstacles=boxes, name=name)


@dataclass
class Pose:
    """Rigid transform: rotation (3x3, local->parent) and translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)


@dataclass
class DepthCameraSpec:
    """Simulated stereo-depth sensor parameters.

    Defaults mirror the real sensor this stands in for: 110x80 degree
    field of view and a 0.1-8 m depth window, at a desk-scale ray count.
    """

    horizontal_fov_deg: float = 110.0
    vertical_fov_deg: float = 80.0
    min_range: float = 0.1
    max_range: float = 8.0
    ray_cols: int = 96
    ray_rows: int = 54
    mount: Pose = field(default_factory=Pose)

    def __post_init__(self):
        if not (0.0 < self.min_range < self.max_range):
            raise ValueError("need 0 < min_range < max_range")
        if not (0.0 < self.horizontal_fov_deg < 180.0
                and 0.0 < self.vertical_fov_deg < 180.0):
            raise ValueError("FOVs must lie in (0, 180) degrees")
        if self.ray_cols < 1 or self.ray_rows < 1:
            raise ValueError("ray grid must be at least 1x1")

    def ray_directions(self) -> np.ndarray:
        """Unit ray directions in the camera frame, shape (rows*cols, 3).

        Camera frame matches the body frame: x forward, y left, z up.
        Rows sweep elevation bottom-to-top, columns azimuth right-to-left;
        grids with odd dimensions include an exact boresight ray.
        """
        half_h = math.radians(self.horizontal_fov_deg) / 2.0
        half_v = math.radians(self.vertical_fov_deg) / 2.0
        az = (np.linspace(-half_h, half_h, self.ray_cols)
              if self.ray_cols > 1 else np.zeros(1))
        el = (np.linspace(-half_v, half_v, self.ray_rows)
              if self.ray_rows > 1 else np.zeros(1))
        tan_az = np.tan(az)[None, :].repeat(self.ray_rows, axis=0)
        tan_el = np.tan(el)[:, None].repeat(self.ray_cols, axis=1)
        dirs = np.stack(
            [np.ones_like(tan_az), tan_az, tan_el], axis=-1).reshape(-1, 3)
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@dataclass
class DepthImage:
    """Per-ray range values, row-major; NO_RETURN marks misses."""

    spec: DepthCameraSpec
    depths: np.ndarray  # (rows, cols), meters along each ray
    camera_pose: Pose   # world-frame pose at capture
    timestamp: float

    def world_points(self) -> np.ndarray:
        """World-frame hit points of all valid returns, shape (n, 3)."""
        depths = self.depths.reshape(-1)
        valid = np.isfinite(depths)
        dirs = self.spec.ray_directions()[valid]
        dirs_world = dirs @ self.camera_pose.rotation.T
        return self.camera_pose.translation + depths[valid, None] * dirs_world


def _ray_box_hits(origin, dirs, box):
    """Slab-method intersection distances; inf where the ray misses."""
    n = dirs.shape[0]
    t_near = np.full(n, -np.inf)
    t_far = np.full(n, np.inf)
    for axis in range(3):
        d = dirs[:, axis]
        o = origin[axis]
        lo = box.min_corner[axis]
        hi = box.max_corner[axis]
        parallel = np.abs(d) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - o) / d
            t2 = (hi - o) / d
        inside = (o >= lo) & (o <= hi)
        t1 = np.where(parallel, np.where(inside, -np.inf, np.inf), t1)
        t2 = np.where(parallel, np.where(inside, np.inf, -np.inf), t2)
        t_near = np.maximum(t_near, np.minimum(t1, t2))
        t_far = np.minimum(t_far, np.maximum(t1, t2))
    hit = (t_far >= t_near) & (t_far > 0.0)
    t = np.where(t_near > 0.0, t_near, t_far)
    return np.where(hit, t, np.inf)


def _ray_triangle_hits(origin, dirs, tri):
    """Moller-Trumbore intersection distances; inf where the ray misses."""
    v0, v1, v2 = tri
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(dirs, e2)
    det = pvec @ e1
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_det = 1.0 / det
    tvec = origin - v0
    u = (pvec @ tvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = (dirs @ qvec) * inv_det
    t = float(e2 @ qvec) * inv_det
    ok = (np.abs(det) > 1e-12) & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) \
        & (t > 0.0)
    return np.where(ok, t, np.inf)


def render_depth(world: WorldModel, camera_pose: Pose,
                 spec: Optional[DepthCameraSpec] = None,
                 timestamp: float = 0.0) -> DepthImage:
    """Cast the camera's ray grid into the world; nearest hit per ray."""
    if spec is None:
        spec = DepthCameraSpec()
    if not (np.all(np.isfinite(camera_pose.rotation))
            and np.all(np.isfinite(camera_pose.translation))):
        raise ValueError("camera pose must be finite")

    origin = camera_pose.translation
    dirs = spec.ray_directions() @ camera_pose.rotation.T

    best = np.full(dirs.shape[0], np.inf)

    # Ground plane z = 0.
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = -origin[2] / dz
    t_ground = np.where((np.abs(dz) > 1e-12) & (t_ground > 0.0),
                        t_ground, np.inf)
    best = np.minimum(best, t_ground)

    for box in world.obstacles:
        best = np.minimum(best, _ray_box_hits(origin, dirs, box))
    for tri in world.triangles:
        best = np.minimum(best, _ray_triangle_hits(origin, dirs, np.asarray(tri)))

    in_window = (best >= spec.min_range) & (best <= spec.max_range)
    depths = np.where(in_window, best, NO_RETURN)
    return DepthImage(spec=spec,
                      depths=depths.reshape(spec.ray_rows, spec.ray_cols),
                      camera_pose=camera_pose, timestamp=timestamp)


__all__ = [
    "Box", "WorldModel", "WorldError", "load_world", "Pose",
    "DepthCameraSpec", "DepthImage", "render_depth", "NO_RETURN",
]
