/**
 * Client-side model of what the cockpit shows: the drone pose stream
 * (interpolated between samples) and the chunk meshes, each held at the
 * highest revision seen so far. The viewer offset from the server hello
 * shifts everything in front of the pilot at render time.
 */

import {
  ChunkCoords, MeshChunk, PoseMsg, ProtocolError, coordsKey,
  decodeMeshChunk, unframe,
} from "./protocol.js";

export interface DisplayPose {
  position: [number, number, number];
  quaternion: [number, number, number, number]; // [w, x, y, z]
  t_ns: number;
}

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

/** Spherical interpolation on [w,x,y,z] quaternions, shortest arc. */
export function slerp(
  a: [number, number, number, number],
  b: [number, number, number, number],
  t: number,
): [number, number, number, number] {
  let [bw, bx, by, bz] = b;
  let dot = a[0] * bw + a[1] * bx + a[2] * by + a[3] * bz;
  if (dot < 0) {
    dot = -dot;
    bw = -bw; bx = -bx; by = -by; bz = -bz;
  }
  let s0: number, s1: number;
  if (dot > 0.9995) {
    s0 = 1 - t;  // nearly parallel: lerp avoids the tiny-angle division
    s1 = t;
  } else {
    const theta = Math.acos(Math.min(dot, 1));
    const sinTheta = Math.sin(theta);
    s0 = Math.sin((1 - t) * theta) / sinTheta;
    s1 = Math.sin(t * theta) / sinTheta;
  }
  const q: [number, number, number, number] = [
    s0 * a[0] + s1 * bw,
    s0 * a[1] + s1 * bx,
    s0 * a[2] + s1 * by,
    s0 * a[3] + s1 * bz,
  ];
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

interface TimedPose {
  pose: PoseMsg;
  arrivalMs: number;
}

export interface ChunkUpdate {
  key: string;
  chunk: MeshChunk;
}

export class SceneModel {
  viewerOffset: [number, number, number] = [0, 0, 0];
  worldName = "";
  chunks = new Map<string, MeshChunk>();
  decodeErrors = 0;
  stalesDropped = 0;

  private prev: TimedPose | null = null;
  private curr: TimedPose | null = null;

  setViewerOffset(offset: [number, number, number]): void {
    this.viewerOffset = offset;
  }

  /** Accept a pose sample; out-of-order timestamps are dropped. */
  applyPose(pose: PoseMsg, arrivalMs: number): boolean {
    if (this.curr !== null && pose.t_ns <= this.curr.pose.t_ns) {
      return false;
    }
    this.prev = this.curr;
    this.curr = { pose, arrivalMs };
    return true;
  }

  /**
   * Pose to draw this frame: interpolated between the two newest
   * samples by wall-clock arrival spacing, so the drone glides through
   * the 30 Hz stream instead of stuttering. Timestamps never decrease.
   */
  displayPose(nowMs: number): DisplayPose | null {
    if (this.curr === null) {
      return null;
    }
    if (this.prev === null) {
      const { p, q, t_ns } = this.curr.pose;
      return { position: [...p], quaternion: [...q], t_ns };
    }
    const gap = this.curr.arrivalMs - this.prev.arrivalMs;
    const alpha = gap <= 0
      ? 1
      : Math.min(Math.max((nowMs - this.curr.arrivalMs) / gap, 0), 1);
    const a = this.prev.pose;
    const b = this.curr.pose;
    return {
      position: [
        lerp(a.p[0], b.p[0], alpha),
        lerp(a.p[1], b.p[1], alpha),
        lerp(a.p[2], b.p[2], alpha),
      ],
      quaternion: slerp(a.q, b.q, alpha),
      t_ns: Math.round(lerp(a.t_ns, b.t_ns, alpha)),
    };
  }

  /**
   * Apply one binary chunk frame (length prefix included). Replaces the
   * stored mesh only for a strictly higher revision; stale frames are
   * dropped silently and corrupt frames are counted but never fatal.
   */
  applyChunkFrame(data: ArrayBuffer): ChunkUpdate | null {
    let chunk: MeshChunk;
    try {
      chunk = decodeMeshChunk(unframe(data));
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.decodeErrors += 1;
        console.error("dropping undecodable chunk frame:", err);
        return null;
      }
      throw err;
    }
    return this.applyChunk(chunk);
  }

  applyChunk(chunk: MeshChunk): ChunkUpdate | null {
    const key = coordsKey(chunk.coords);
    const existing = this.chunks.get(key);
    if (existing !== undefined && chunk.revision <= existing.revision) {
      this.stalesDropped += 1;
      return null;
    }
    this.chunks.set(key, chunk);
    return { key, chunk };
  }

  chunkRevision(coords: ChunkCoords): number | undefined {
    return this.chunks.get(coordsKey(coords))?.revision;
  }
}
