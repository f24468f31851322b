"""Server configuration: defaults plus a `key = value` text file loader."""

from dataclasses import dataclass, field, fields
from typing import Optional, Tuple

import numpy as np

from .controller import GainSet, VelocityLimits
from .dynamics import VehicleParams
from .world import DepthCameraSpec, Pose


class ConfigError(ValueError):
    """Bad key, value, or invariant in a config file."""


@dataclass
class ServerConfig:
    # transport
    listen_host: str = "127.0.0.1"
    listen_port: int = 8765
    # loop rates
    physics_rate_hz: float = 500.0
    scan_rate_hz: float = 10.0
    pose_rate_hz: float = 30.0
    probe_rate_hz: float = 10.0
    # vehicle
    mass: float = 2.0
    inertia_diag: Tuple[float, float, float] = (0.02, 0.02, 0.04)
    gravity: float = 9.81
    thrust_max: float = 60.0
    torque_max: Tuple[float, float, float] = (2.0, 2.0, 1.0)
    start_position: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    # controller gains (diagonals)
    gain_velocity_error: Tuple[float, float, float] = (5.0, 5.0, 6.0)
    gain_position_error: Tuple[float, float, float] = (8.0, 8.0, 10.0)
    gain_attitude: Tuple[float, float, float] = (4.0, 4.0, 1.5)
    gain_body_rate: Tuple[float, float, float] = (0.8, 0.8, 0.4)
    # pilot limits
    v_max: float = 1.0
    yaw_rate_max: float = 1.0
    takeoff_altitude: float = 1.0
    climb_rate: float = 0.5
    # mapping / camera
    voxel_size_m: float = 0.10
    camera_hfov_deg: float = 110.0
    camera_vfov_deg: float = 80.0
    camera_min_range_m: float = 0.1
    camera_max_range_m: float = 8.0
    camera_ray_cols: int = 96
    camera_ray_rows: int = 54
    # world / viewer
    world_file: Optional[str] = None
    viewer_offset_m: Tuple[float, float, float] = (5.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("physics_rate_hz", "scan_rate_hz", "pose_rate_hz",
                     "probe_rate_hz"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.v_max <= 0.0:
            raise ConfigError("v_max must be positive")

    def vehicle_params(self) -> VehicleParams:
        return VehicleParams(mass=self.mass,
                             inertia=np.diag(self.inertia_diag),
                             gravity=self.gravity,
                             thrust_max=self.thrust_max,
                             torque_max=np.array(self.torque_max))

    def gains(self) -> GainSet:
        return GainSet(gain_velocity_error=np.diag(self.gain_velocity_error),
                       gain_position_error=np.diag(self.gain_position_error),
                       gain_attitude=np.diag(self.gain_attitude),
                       gain_body_rate=np.diag(self.gain_body_rate))

    def velocity_limits(self) -> VelocityLimits:
        return VelocityLimits(v_max=self.v_max,
                              yaw_rate_max=self.yaw_rate_max,
                              takeoff_altitude=self.takeoff_altitude,
                              climb_rate=self.climb_rate)

    def camera_spec(self) -> DepthCameraSpec:
        return DepthCameraSpec(horizontal_fov_deg=self.camera_hfov_deg,
                               vertical_fov_deg=self.camera_vfov_deg,
                               min_range=self.camera_min_range_m,
                               max_range=self.camera_max_range_m,
                               ray_cols=self.camera_ray_cols,
                               ray_rows=self.camera_ray_rows,
                               mount=Pose())


_FIELD_TYPES = {f.name: f.type for f in fields(ServerConfig)}
_STRING_FIELDS = {"listen_host", "world_file"}


def _parse_value(name: str, text: str):
    kind = _FIELD_TYPES[name]
    if name in _STRING_FIELDS:
        return text
    try:
        if kind is float:
            return float(text)
        if kind is int:
            return int(text)
        parts = text.split()
        if len(parts) != 3:
            raise ConfigError(f"{name} expects 3 values, got {len(parts)}")
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None


def load_config(path) -> ServerConfig:
    """Read a `key = value` config file (# comments, blank lines ok)."""
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            # int-typed fields come through _parse_value above
            overrides[key] = _parse_value(key, value)
    try:
        return ServerConfig(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


__all__ = ["ServerConfig", "load_config", "ConfigError"]
