"""Dual-channel wire protocol.

Text channel: one JSON object per line, discriminated by a `type` field
drawn from a closed set (hello, pose, cmd_vel, takeoff, land, ping, pong,
chunk_notice). Timestamps are session-epoch nanoseconds and always travel
as JSON integers so 64-bit values survive the round trip.

Binary channel: mesh chunks in the MSH1 format, little-endian throughout:

    offset  size  field
    0       4     magic "MSH1"
    4       2     u16 version (= 1)
    6       2     u16 flags (= 0)
    8       12    3 x i32 chunk coords
    20      4     u32 revision
    24      2     u16 vertex count V
    26      2     u16 triangle count T
    28      12V   V x 3 f32 positions (m, world frame)
    28+12V  12V   V x 3 f32 normals
    28+24V  12T   T x 3 u32 triangle indices

Total length is exactly 28 + 24V + 12T bytes. Frames on the wire carry a
u32 little-endian length prefix ahead of the payload.

One-way latency is estimated as half the round trip of an echoed probe,
so no clock synchronization between the peers is needed.
"""

import json
import struct
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np

from .mapping import MeshChunk

PROTOCOL_VERSION = 1

MESH_MAGIC = b"MSH1"
MESH_VERSION = 1
_HEADER = struct.Struct("<4sHH3iIHH")
MESH_HEADER_BYTES = _HEADER.size  # 28
MESH_MAX_COUNT = 0xFFFF


class ProtocolError(Exception):
    """Base class for every wire-format failure."""


class MeshCodecError(ProtocolError):
    """Base class for binary mesh codec failures."""


class BadMagicError(MeshCodecError):
    pass


class UnsupportedVersionError(MeshCodecError):
    pass


class TruncatedError(MeshCodecError):
    """Declared counts or header exceed the available bytes."""


class TrailingBytesError(MeshCodecError):
    """Payload continues past the declared counts."""


class IndexOutOfRangeError(MeshCodecError):
    """A triangle references a vertex index >= the vertex count."""


class MessageError(ProtocolError):
    """Base class for JSON message channel failures."""


class UnknownTypeError(MessageError):
    pass


class MissingFieldError(MessageError):
    pass


class BadValueError(MessageError):
    pass


class NegativeIntervalError(ProtocolError):
    """Echo receipt timestamp earlier than the send timestamp."""


def encode_mesh_chunk(chunk: MeshChunk) -> bytes:
    """Serialize a mesh chunk into the MSH1 byte layout."""
    v = chunk.vertex_count
    t = chunk.triangle_count
    if v > MESH_MAX_COUNT or t > MESH_MAX_COUNT:
        raise MeshCodecError(f"chunk too large for wire format ({v} verts, "
                             f"{t} tris)")
    cx, cy, cz = chunk.chunk_coords
    header = _HEADER.pack(MESH_MAGIC, MESH_VERSION, 0, cx, cy, cz,
                          chunk.revision, v, t)
    return b"".join((
        header,
        np.ascontiguousarray(chunk.vertices, dtype="<f4").tobytes(),
        np.ascontiguousarray(chunk.normals, dtype="<f4").tobytes(),
        np.ascontiguousarray(chunk.triangles, dtype="<u4").tobytes(),
    ))


def decode_mesh_chunk(data: bytes) -> MeshChunk:
    """Parse MSH1 bytes; total over arbitrary input, every failure typed."""
    if len(data) < 4:
        raise TruncatedError(f"{len(data)} bytes is shorter than the magic")
    if data[:4] != MESH_MAGIC:
        if data[:3] == MESH_MAGIC[:3]:
            raise UnsupportedVersionError(f"unknown format revision "
                                          f"{data[3:4]!r}")
        raise BadMagicError(f"bad magic {data[:4]!r}")
    if len(data) < MESH_HEADER_BYTES:
        raise TruncatedError(f"header needs {MESH_HEADER_BYTES} bytes, "
                             f"got {len(data)}")
    _, version, _flags, cx, cy, cz, revision, v, t = _HEADER.unpack_from(data)
    if version != MESH_VERSION:
        raise UnsupportedVersionError(f"version {version}")
    expected = MESH_HEADER_BYTES + 24 * v + 12 * t
    if len(data) < expected:
        raise TruncatedError(f"need {expected} bytes for {v} vertices and "
                             f"{t} triangles, got {len(data)}")
    if len(data) > expected:
        raise TrailingBytesError(f"{len(data) - expected} bytes past the "
                                 f"declared payload")
    off = MESH_HEADER_BYTES
    vertices = np.frombuffer(data, dtype="<f4", count=3 * v, offset=off)
    off += 12 * v
    normals = np.frombuffer(data, dtype="<f4", count=3 * v, offset=off)
    off += 12 * v
    triangles = np.frombuffer(data, dtype="<u4", count=3 * t, offset=off)
    if t and triangles.max(initial=0) >= v:
        raise IndexOutOfRangeError(
            f"triangle index {int(triangles.max())} >= vertex count {v}")
    return MeshChunk(chunk_coords=(cx, cy, cz), revision=revision,
                     vertices=vertices.reshape(-1, 3).copy(),
                     normals=normals.reshape(-1, 3).copy(),
                     triangles=triangles.reshape(-1, 3).copy())


def encoded_mesh_size(vertex_count: int, triangle_count: int) -> int:
    return MESH_HEADER_BYTES + 24 * vertex_count + 12 * triangle_count


def frame(payload: bytes) -> bytes:
    """Prefix a binary payload with its u32 little-endian length."""
    return struct.pack("<I", len(payload)) + payload


def unframe(data: bytes) -> bytes:
    """Strip and validate the u32 length prefix of a single frame."""
    if len(data) < 4:
        raise TruncatedError("frame shorter than its length prefix")
    (length,) = struct.unpack_from("<I", data)
    if len(data) - 4 != length:
        raise TruncatedError(f"frame declares {length} bytes, carries "
                             f"{len(data) - 4}")
    return data[4:]


# --- JSON message channel ----------------------------------------------------

@dataclass
class Hello:
    """Server greeting; clients send one back with just their version."""

    protocol_version: int = PROTOCOL_VERSION
    world_name: str = ""
    chunk_list: List[Tuple[Tuple[int, int, int], int]] = field(default_factory=list)
    viewer_offset_m: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    type = "hello"


@dataclass
class Pose:
    t_ns: int
    p: Tuple[float, float, float]
    q: Tuple[float, float, float, float]  # [w, x, y, z] unit quaternion
    type = "pose"


@dataclass
class CmdVel:
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    yaw_rate: float = 0.0
    type = "cmd_vel"


@dataclass
class Takeoff:
    type = "takeoff"


@dataclass
class Land:
    type = "land"


@dataclass
class Ping:
    id: int
    t_tx_ns: int
    type = "ping"


@dataclass
class Pong:
    """Echo of a ping; both fields come back verbatim."""

    id: int
    t_tx_ns: int
    type = "pong"


@dataclass
class ChunkNotice:
    coords: Tuple[int, int, int]
    revision: int
    type = "chunk_notice"


Envelope = Union[Hello, Pose, CmdVel, Takeoff, Land, Ping, Pong, ChunkNotice]


def _require(obj: dict, key: str):
    if key not in obj:
        raise MissingFieldError(key)
    return obj[key]


def _as_int(value, key: str, minimum: int = 0) -> int:
    # bool is an int subclass; reject it explicitly.
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadValueError(f"{key} must be an integer, got {value!r}")
    if value < minimum:
        raise BadValueError(f"{key} must be >= {minimum}, got {value}")
    return value


def _as_float(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadValueError(f"{key} must be a number, got {value!r}")
    return float(value)


def _as_vec(value, key: str, n: int) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise BadValueError(f"{key} must be a list of {n} numbers")
    return tuple(_as_float(x, key) for x in value)


def _as_coords(value, key: str) -> Tuple[int, int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise BadValueError(f"{key} must be a list of 3 integers")
    # Coords may be negative; only the type is constrained.
    out = []
    for x in value:
        if isinstance(x, bool) or not isinstance(x, int):
            raise BadValueError(f"{key} must hold integers, got {x!r}")
        out.append(x)
    return (out[0], out[1], out[2])


def encode_message(env: Envelope) -> str:
    """Serialize an envelope to a single JSON text line."""
    if isinstance(env, Hello):
        obj = {
            "type": "hello",
            "protocol_version": env.protocol_version,
            "world_name": env.world_name,
            "chunk_list": [{"coords": list(c), "revision": r}
                           for c, r in env.chunk_list],
            "viewer_offset_m": list(env.viewer_offset_m),
        }
    elif isinstance(env, Pose):
        obj = {"type": "pose", "t_ns": env.t_ns, "p": list(env.p),
               "q": list(env.q)}
    elif isinstance(env, CmdVel):
        obj = {"type": "cmd_vel", "vx": env.vx, "vy": env.vy, "vz": env.vz,
               "yaw_rate": env.yaw_rate}
    elif isinstance(env, Takeoff):
        obj = {"type": "takeoff"}
    elif isinstance(env, Land):
        obj = {"type": "land"}
    elif isinstance(env, (Ping, Pong)):
        obj = {"type": env.type, "id": env.id, "t_tx_ns": env.t_tx_ns}
    elif isinstance(env, ChunkNotice):
        obj = {"type": "chunk_notice", "coords": list(env.coords),
               "revision": env.revision}
    else:
        raise UnknownTypeError(f"cannot encode {type(env).__name__}")
    return json.dumps(obj, separators=(",", ":"))


def decode_message(text: Union[str, bytes]) -> Envelope:
    """Parse one JSON text line into an envelope; total with typed errors.

    Limits (velocity bounds etc.) are deliberately not enforced here;
    ingestion clamps after decode.
    """
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BadValueError(f"malformed JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise BadValueError("message must be a JSON object")
    kind = _require(obj, "type")
    if not isinstance(kind, str):
        raise BadValueError("type must be a string")

    if kind == "hello":
        version = _as_int(_require(obj, "protocol_version"), "protocol_version")
        world_name = obj.get("world_name", "")
        if not isinstance(world_name, str):
            raise BadValueError("world_name must be a string")
        raw_list = obj.get("chunk_list", [])
        if not isinstance(raw_list, list):
            raise BadValueError("chunk_list must be a list")
        chunk_list = []
        for entry in raw_list:
            if not isinstance(entry, dict):
                raise BadValueError("chunk_list entries must be objects")
            chunk_list.append((_as_coords(_require(entry, "coords"), "coords"),
                               _as_int(_require(entry, "revision"), "revision")))
        offset = _as_vec(obj.get("viewer_offset_m", [0.0, 0.0, 0.0]),
                         "viewer_offset_m", 3)
        return Hello(version, world_name, chunk_list, offset)
    if kind == "pose":
        return Pose(t_ns=_as_int(_require(obj, "t_ns"), "t_ns"),
                    p=_as_vec(_require(obj, "p"), "p", 3),
                    q=_as_vec(_require(obj, "q"), "q", 4))
    if kind == "cmd_vel":
        return CmdVel(vx=_as_float(_require(obj, "vx"), "vx"),
                      vy=_as_float(_require(obj, "vy"), "vy"),
                      vz=_as_float(_require(obj, "vz"), "vz"),
                      yaw_rate=_as_float(_require(obj, "yaw_rate"), "yaw_rate"))
    if kind == "takeoff":
        return Takeoff()
    if kind == "land":
        return Land()
    if kind in ("ping", "pong"):
        ident = _as_int(_require(obj, "id"), "id")
        t_tx = _as_int(_require(obj, "t_tx_ns"), "t_tx_ns")
        return Ping(ident, t_tx) if kind == "ping" else Pong(ident, t_tx)
    if kind == "chunk_notice":
        return ChunkNotice(coords=_as_coords(_require(obj, "coords"), "coords"),
                           revision=_as_int(_require(obj, "revision"),
                                            "revision"))
    raise UnknownTypeError(kind)


def resolve_probe(t_tx_ns: int, t_rx_ns: int) -> int:
    """One-way latency estimate: half the round trip, integer ns."""
    if t_rx_ns < t_tx_ns:
        raise NegativeIntervalError(f"t_rx {t_rx_ns} < t_tx {t_tx_ns}")
    return (t_rx_ns - t_tx_ns) // 2


@dataclass
class LatencyProbe:
    """One completed ping/pong exchange, server clock both ends."""

    id: int
    t_tx_ns: int
    t_rx_ns: int

    def __post_init__(self):
        if self.t_rx_ns < self.t_tx_ns:
            raise NegativeIntervalError(
                f"t_rx {self.t_rx_ns} < t_tx {self.t_tx_ns}")

    @property
    def one_way_ns(self) -> int:
        return resolve_probe(self.t_tx_ns, self.t_rx_ns)

    @property
    def one_way_ms(self) -> float:
        return self.one_way_ns / 1e6


__all__ = [
    "PROTOCOL_VERSION", "MESH_MAGIC", "MESH_VERSION", "MESH_HEADER_BYTES",
    "encode_mesh_chunk", "decode_mesh_chunk", "encoded_mesh_size",
    "frame", "unframe",
    "Hello", "Pose", "CmdVel", "Takeoff", "Land", "Ping", "Pong",
    "ChunkNotice", "Envelope", "encode_message", "decode_message",
    "resolve_probe", "LatencyProbe",
    "ProtocolError", "MeshCodecError", "BadMagicError",
    "UnsupportedVersionError", "TruncatedError", "TrailingBytesError",
    "IndexOutOfRangeError", "MessageError", "UnknownTypeError",
    "MissingFieldError", "BadValueError", "NegativeIntervalError",
]
