/**
 * Wire protocol: JSON envelopes on the text channel, MSH1 mesh chunks on
 * the binary channel. Everything little-endian; binary frames carry a
 * u32 length prefix ahead of the payload.
 */

export const PROTOCOL_VERSION = 1;

export type ChunkCoords = [number, number, number];

export interface ChunkRef {
  coords: ChunkCoords;
  revision: number;
}

export interface HelloMsg {
  type: "hello";
  protocol_version: number;
  world_name: string;
  chunk_list: ChunkRef[];
  viewer_offset_m: [number, number, number];
}

export interface PoseMsg {
  type: "pose";
  t_ns: number;
  p: [number, number, number];
  q: [number, number, number, number]; // [w, x, y, z]
}

export interface CmdVelMsg {
  type: "cmd_vel";
  vx: number;
  vy: number;
  vz: number;
  yaw_rate: number;
}

export interface TakeoffMsg { type: "takeoff" }
export interface LandMsg { type: "land" }
export interface PingMsg { type: "ping"; id: number; t_tx_ns: number }
export interface PongMsg { type: "pong"; id: number; t_tx_ns: number }

export interface ChunkNoticeMsg {
  type: "chunk_notice";
  coords: ChunkCoords;
  revision: number;
}

export type Envelope =
  | HelloMsg | PoseMsg | CmdVelMsg | TakeoffMsg | LandMsg
  | PingMsg | PongMsg | ChunkNoticeMsg;

const MESSAGE_TYPES = new Set([
  "hello", "pose", "cmd_vel", "takeoff", "land", "ping", "pong",
  "chunk_notice",
]);

export class ProtocolError extends Error {}
export class BadMagicError extends ProtocolError {}
export class UnsupportedVersionError extends ProtocolError {}
export class TruncatedError extends ProtocolError {}
export class TrailingBytesError extends ProtocolError {}
export class IndexOutOfRangeError extends ProtocolError {}
export class MessageError extends ProtocolError {}

export function decodeMessage(text: string): Envelope {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (err) {
    throw new MessageError(`malformed JSON: ${err}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new MessageError("message must be a JSON object");
  }
  const kind = (obj as { type?: unknown }).type;
  if (typeof kind !== "string" || !MESSAGE_TYPES.has(kind)) {
    throw new MessageError(`unknown message type ${String(kind)}`);
  }
  return obj as Envelope;
}

export function encodeMessage(env: Envelope): string {
  return JSON.stringify(env);
}

/** Decoded MSH1 payload; typed arrays view freshly copied buffers. */
export interface MeshChunk {
  coords: ChunkCoords;
  revision: number;
  vertices: Float32Array;  // 3 per vertex, meters, world frame
  normals: Float32Array;   // 3 per vertex, unit
  triangles: Uint32Array;  // 3 indices per triangle
}

const MESH_HEADER_BYTES = 28;
const MAGIC = [0x4d, 0x53, 0x48, 0x31]; // "MSH1"

/** Strip and validate the u32 length prefix of one binary frame. */
export function unframe(data: ArrayBuffer): ArrayBuffer {
  if (data.byteLength < 4) {
    throw new TruncatedError("frame shorter than its length prefix");
  }
  const declared = new DataView(data).getUint32(0, true);
  if (data.byteLength - 4 !== declared) {
    throw new TruncatedError(
      `frame declares ${declared} bytes, carries ${data.byteLength - 4}`);
  }
  return data.slice(4);
}

/** Parse MSH1 bytes; throws a typed ProtocolError on any malformation. */
export function decodeMeshChunk(data: ArrayBuffer): MeshChunk {
  const view = new DataView(data);
  if (data.byteLength < 4) {
    throw new TruncatedError(`${data.byteLength} bytes is shorter than the magic`);
  }
  const magicOk = MAGIC.every((b, i) => view.getUint8(i) === b);
  if (!magicOk) {
    if (MAGIC.slice(0, 3).every((b, i) => view.getUint8(i) === b)) {
      throw new UnsupportedVersionError("unknown format revision");
    }
    throw new BadMagicError("bad magic");
  }
  if (data.byteLength < MESH_HEADER_BYTES) {
    throw new TruncatedError(
      `header needs ${MESH_HEADER_BYTES} bytes, got ${data.byteLength}`);
  }
  const version = view.getUint16(4, true);
  if (version !== 1) {
    throw new UnsupportedVersionError(`version ${version}`);
  }
  const coords: ChunkCoords = [
    view.getInt32(8, true), view.getInt32(12, true), view.getInt32(16, true),
  ];
  const revision = view.getUint32(20, true);
  const vertexCount = view.getUint16(24, true);
  const triangleCount = view.getUint16(26, true);
  const expected = MESH_HEADER_BYTES + 24 * vertexCount + 12 * triangleCount;
  if (data.byteLength < expected) {
    throw new TruncatedError(
      `need ${expected} bytes for ${vertexCount} vertices and ` +
      `${triangleCount} triangles, got ${data.byteLength}`);
  }
  if (data.byteLength > expected) {
    throw new TrailingBytesError(
      `${data.byteLength - expected} bytes past the declared payload`);
  }
  let off = MESH_HEADER_BYTES;
  const vertices = new Float32Array(data.slice(off, off + 12 * vertexCount));
  off += 12 * vertexCount;
  const normals = new Float32Array(data.slice(off, off + 12 * vertexCount));
  off += 12 * vertexCount;
  const triangles = new Uint32Array(data.slice(off, off + 12 * triangleCount));
  for (let i = 0; i < triangles.length; i++) {
    if (triangles[i] >= vertexCount) {
      throw new IndexOutOfRangeError(
        `triangle index ${triangles[i]} >= vertex count ${vertexCount}`);
    }
  }
  return { coords, revision, vertices, normals, triangles };
}

export function coordsKey(coords: ChunkCoords): string {
  return `${coords[0]},${coords[1]},${coords[2]}`;
}
