import { describe, expect, it } from "vitest";

import { CockpitSession } from "../src/session.js";
import { SocketLike } from "../src/session.js";
import { decodeMessage, encodeMessage } from "../src/protocol.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  sentAt: number[] = [];
  send(data: string): void {
    this.sent.push(data);
    this.sentAt.push(performance.now());
  }
  close(): void {}
}

describe("cockpit session", () => {
  it("handshakes with its protocol version", () => {
    const socket = new FakeSocket();
    const session = new CockpitSession(socket);
    session.sendHandshake();
    const env = decodeMessage(socket.sent[0]);
    expect(env.type).toBe("hello");
    if (env.type === "hello") {
      expect(env.protocol_version).toBe(1);
    }
  });

  it("applies the server hello to the scene", () => {
    const socket = new FakeSocket();
    let ready = false;
    const session = new CockpitSession(socket, { onReady: () => { ready = true; } });
    session.handleText(JSON.stringify({
      type: "hello", protocol_version: 1, world_name: "wall",
      chunk_list: [], viewer_offset_m: [5, 0, 0],
    }));
    expect(ready).toBe(true);
    expect(session.scene.worldName).toBe("wall");
    expect(session.scene.viewerOffset).toEqual([5, 0, 0]);
  });

  it("echoes pings verbatim and fast", () => {
    const socket = new FakeSocket();
    const session = new CockpitSession(socket);
    const t0 = performance.now();
    for (let i = 0; i < 100; i++) {
      session.handleText(encodeMessage(
        { type: "ping", id: i, t_tx_ns: 123456789 + i }));
    }
    const elapsed = performance.now() - t0;
    expect(session.pongsEchoed).toBe(100);
    // Synchronous echo: far inside the 5 ms budget even averaged.
    expect(elapsed / 100).toBeLessThan(5);
    const pong = decodeMessage(socket.sent[0]);
    expect(pong).toEqual({ type: "pong", id: 0, t_tx_ns: 123456789 });
  });

  it("measures rtt/2 on its own probes", () => {
    let clock = 1000;
    const socket = new FakeSocket();
    const latencies: number[] = [];
    const session = new CockpitSession(
      socket, { onLatency: (ms) => latencies.push(ms) }, undefined,
      () => clock);
    session.sendProbe();
    const ping = decodeMessage(socket.sent[0]);
    expect(ping.type).toBe("ping");
    clock += 84; // 84 ms round trip
    if (ping.type === "ping") {
      session.handleText(encodeMessage(
        { type: "pong", id: ping.id, t_tx_ns: ping.t_tx_ns }));
    }
    expect(latencies).toEqual([42]);
    expect(session.lastOneWayMs).toBe(42);
  });

  it("ignores stray pongs and survives junk text", () => {
    const socket = new FakeSocket();
    const errors: string[] = [];
    const session = new CockpitSession(socket, {
      onError: (m) => errors.push(m),
    });
    session.handleText(encodeMessage({ type: "pong", id: 99, t_tx_ns: 1 }));
    expect(session.lastOneWayMs).toBeNull();
    session.handleText("garbage {{{");
    session.handleText('{"type":"warp"}');
    expect(errors.length).toBe(2);
  });

  it("feeds poses into the scene", () => {
    const session = new CockpitSession(new FakeSocket());
    session.handleText(JSON.stringify(
      { type: "pose", t_ns: 5, p: [1, 2, 3], q: [1, 0, 0, 0] }));
    const display = session.scene.displayPose(performance.now());
    expect(display!.position).toEqual([1, 2, 3]);
  });
});
