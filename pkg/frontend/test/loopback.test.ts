/**
 * End-to-end against the real ground station on loopback: spawns
 * `vr-gcs serve`, connects with the actual session code over a real
 * WebSocket, echoes probes, and checks the latency the server measured.
 */

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { WebSocket } from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { CockpitSession } from "../src/session.js";
import { PoseMsg } from "../src/protocol.js";

const HAVE_SERVER = spawnSync("vr-gcs", ["--help"]).status === 0;
const PORT = 18230 + (process.pid % 1000);

let server: ChildProcess | null = null;
let workdir: string;

function connectSession(): Promise<{
  ws: WebSocket; session: CockpitSession;
}> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(`ws://127.0.0.1:${PORT}`);
    ws.binaryType = "arraybuffer";
    const session = new CockpitSession(
      { send: (d) => ws.send(d), close: () => ws.close() },
      { onReady: () => resolve({ ws, session }) });
    ws.on("open", () => session.sendHandshake());
    ws.on("message", (data, isBinary) => {
      if (isBinary) {
        // With binaryType="arraybuffer" ws hands over an ArrayBuffer;
        // cover the Buffer shape too for safety.
        if (data instanceof ArrayBuffer) {
          session.handleBinary(data);
        } else {
          const buf = data as Buffer;
          session.handleBinary(buf.buffer.slice(
            buf.byteOffset, buf.byteOffset + buf.byteLength));
        }
      } else {
        session.handleText(data.toString());
      }
    });
    ws.on("error", reject);
    setTimeout(() => reject(new Error("handshake timeout")), 10_000);
  });
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

describe.skipIf(!HAVE_SERVER)("live loopback session", () => {
  beforeAll(async () => {
    workdir = mkdtempSync(join(tmpdir(), "cockpit-test-"));
    writeFileSync(join(workdir, "wall.world"), "box 4.8 -2 0 5.0 2 3\n");
    server = spawn("vr-gcs", [
      "serve", "--world", join(workdir, "wall.world"),
      "--port", String(PORT),
      "--latency-csv", join(workdir, "latency.csv"),
    ], { stdio: "ignore" });
    await sleep(1500);
  }, 20_000);

  afterAll(async () => {
    server?.kill("SIGINT");
    await sleep(800);
    server?.kill("SIGKILL");
  });

  it("handshakes, catches up chunks, streams poses, echoes probes",
     async () => {
    const { ws, session } = await connectSession();
    expect(session.hello!.world_name).toBe("wall");
    expect(session.hello!.viewer_offset_m).toEqual([5, 0, 0]);

    await sleep(2000);
    // Catch-up: every chunk listed in hello is now in the scene at >= its
    // advertised revision.
    expect(session.hello!.chunk_list.length).toBeGreaterThan(0);
    for (const ref of session.hello!.chunk_list) {
      const rev = session.scene.chunkRevision(ref.coords);
      expect(rev).toBeDefined();
      expect(rev!).toBeGreaterThanOrEqual(ref.revision);
    }

    // Pose stream arrived and timestamps increase.
    const display = session.scene.displayPose(performance.now());
    expect(display).not.toBeNull();

    // Server pings got echoed; its own probes resolve quickly too.
    expect(session.pongsEchoed).toBeGreaterThanOrEqual(5);
    session.sendProbe();
    await sleep(300);
    expect(session.lastOneWayMs).not.toBeNull();
    expect(session.lastOneWayMs!).toBeLessThan(5);

    ws.close();
    await sleep(200);
  }, 30_000);

  it("server-side latency log shows sub-5 ms loopback echoes", async () => {
    server?.kill("SIGINT");
    await sleep(1200);
    const csv = readFileSync(join(workdir, "latency.csv"), "utf8").trim();
    const rows = csv.split("\n").slice(1).map((r) => r.split(","));
    expect(rows.length).toBeGreaterThanOrEqual(5);
    const oneWayMs = rows.map((r) => parseFloat(r[2]));
    const sorted = [...oneWayMs].sort((a, b) => a - b);
    const median = sorted[Math.floor(sorted.length / 2)];
    expect(median).toBeLessThan(5);
  }, 30_000);
});
