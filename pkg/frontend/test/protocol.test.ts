import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  BadMagicError, IndexOutOfRangeError, MessageError, TrailingBytesError,
  TruncatedError, UnsupportedVersionError, decodeMeshChunk, decodeMessage,
  encodeMessage, unframe,
} from "../src/protocol.js";

const FIXTURES = join(__dirname, "fixtures");

function goldenFrame(): ArrayBuffer {
  const buf = readFileSync(join(FIXTURES, "cube_chunk.frame"));
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
}

const golden = JSON.parse(
  readFileSync(join(FIXTURES, "cube_chunk.json"), "utf8"));

describe("MSH1 decoding of server-encoded bytes", () => {
  it("decodes the golden cube chunk", () => {
    const chunk = decodeMeshChunk(unframe(goldenFrame()));
    expect(chunk.coords).toEqual(golden.coords);
    expect(chunk.revision).toBe(golden.revision);
    expect(chunk.vertices.length).toBe(3 * golden.vertex_count);
    expect(chunk.triangles.length).toBe(3 * golden.triangle_count);
    expect([...chunk.vertices.slice(0, 3)]).toEqual(golden.first_vertex);
    const sum = [...chunk.vertices].reduce((a, b) => a + b, 0);
    expect(sum).toBeCloseTo(golden.vertex_sum, 4);
    for (const index of chunk.triangles) {
      expect(index).toBeLessThan(golden.vertex_count);
    }
    for (let v = 0; v < golden.vertex_count; v++) {
      const n = Math.hypot(chunk.normals[3 * v], chunk.normals[3 * v + 1],
                           chunk.normals[3 * v + 2]);
      expect(Math.abs(n - 1)).toBeLessThan(1e-3);
    }
  });

  it("enforces the length prefix", () => {
    const frame = goldenFrame();
    expect(frame.byteLength).toBe(golden.frame_bytes);
    expect(() => unframe(frame.slice(0, frame.byteLength - 1)))
      .toThrow(TruncatedError);
    expect(() => unframe(new ArrayBuffer(2))).toThrow(TruncatedError);
  });

  it("rejects bad magic", () => {
    const payload = new Uint8Array(unframe(goldenFrame()));
    payload[0] ^= 0xff;
    expect(() => decodeMeshChunk(payload.buffer)).toThrow(BadMagicError);
  });

  it("rejects unknown versions", () => {
    const payload = new Uint8Array(unframe(goldenFrame()));
    payload[3] = 0x32; // "MSH2"
    expect(() => decodeMeshChunk(payload.buffer))
      .toThrow(UnsupportedVersionError);
    const v9 = new Uint8Array(unframe(goldenFrame()));
    new DataView(v9.buffer).setUint16(4, 9, true);
    expect(() => decodeMeshChunk(v9.buffer)).toThrow(UnsupportedVersionError);
  });

  it("rejects truncated payloads without allocating", () => {
    const payload = unframe(goldenFrame());
    expect(() => decodeMeshChunk(payload.slice(0, 30)))
      .toThrow(TruncatedError);
    const bomb = new Uint8Array(28);
    bomb.set([0x4d, 0x53, 0x48, 0x31]);
    const view = new DataView(bomb.buffer);
    view.setUint16(4, 1, true);
    view.setUint16(24, 0xffff, true);
    view.setUint16(26, 0xffff, true);
    expect(() => decodeMeshChunk(bomb.buffer)).toThrow(TruncatedError);
  });

  it("rejects trailing bytes and bad indices", () => {
    const payload = new Uint8Array(unframe(goldenFrame()));
    const extra = new Uint8Array(payload.length + 1);
    extra.set(payload);
    expect(() => decodeMeshChunk(extra.buffer)).toThrow(TrailingBytesError);

    const corrupt = new Uint8Array(unframe(goldenFrame()));
    new DataView(corrupt.buffer).setUint32(corrupt.length - 12, 4096, true);
    expect(() => decodeMeshChunk(corrupt.buffer))
      .toThrow(IndexOutOfRangeError);
  });
});

describe("JSON envelopes", () => {
  it("round trips a cmd_vel", () => {
    const line = encodeMessage(
      { type: "cmd_vel", vx: 0.5, vy: -0.1, vz: 0, yaw_rate: 0.2 });
    expect(decodeMessage(line)).toEqual(
      { type: "cmd_vel", vx: 0.5, vy: -0.1, vz: 0, yaw_rate: 0.2 });
  });

  it("parses a server hello", () => {
    const env = decodeMessage(JSON.stringify({
      type: "hello", protocol_version: 1, world_name: "wall",
      chunk_list: [{ coords: [3, 0, 0], revision: 2 }],
      viewer_offset_m: [5, 0, 0],
    }));
    expect(env.type).toBe("hello");
    if (env.type === "hello") {
      expect(env.world_name).toBe("wall");
      expect(env.chunk_list[0].revision).toBe(2);
    }
  });

  it("rejects unknown types and non-objects", () => {
    expect(() => decodeMessage('{"type":"warp"}')).toThrow(MessageError);
    expect(() => decodeMessage("[1,2,3]")).toThrow(MessageError);
    expect(() => decodeMessage("{nope")).toThrow(MessageError);
  });
});
