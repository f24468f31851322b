/**
 * Cockpit session: speaks the protocol over one WebSocket-like socket.
 * Server pings are echoed back immediately (the server derives one-way
 * latency as rtt/2); the client also fires its own probes so the HUD
 * can show latency without server cooperation.
 */

import {
  CmdVelMsg, Envelope, HelloMsg, MessageError, PROTOCOL_VERSION,
  decodeMessage, encodeMessage,
} from "./protocol.js";
import { SceneModel } from "./scene-model.js";
import { CommandSink, ModeCommand } from "./input.js";

/** Minimal socket surface; satisfied by browser WebSocket and by fakes. */
export interface SocketLike {
  send(data: string): void;
  close(code?: number, reason?: string): void;
}

export interface SessionEvents {
  onReady?(hello: HelloMsg): void;
  onLatency?(oneWayMs: number): void;
  onError?(message: string): void;
}

export class CockpitSession implements CommandSink {
  readonly scene: SceneModel;
  hello: HelloMsg | null = null;
  lastOneWayMs: number | null = null;
  probesSent = 0;
  pongsEchoed = 0;

  private nextProbeId = 1;
  private outstanding = new Map<number, number>(); // id -> performance.now()

  constructor(private readonly socket: SocketLike,
              private readonly events: SessionEvents = {},
              scene?: SceneModel,
              private readonly now: () => number =
                  () => performance.now()) {
    this.scene = scene ?? new SceneModel();
  }

  /** First message of the conversation: our protocol version. */
  sendHandshake(): void {
    this.socket.send(encodeMessage({
      type: "hello",
      protocol_version: PROTOCOL_VERSION,
      world_name: "",
      chunk_list: [],
      viewer_offset_m: [0, 0, 0],
    }));
  }

  /** Handle one incoming text message. */
  handleText(text: string): void {
    let env: Envelope;
    try {
      env = decodeMessage(text);
    } catch (err) {
      if (err instanceof MessageError) {
        this.events.onError?.(`undecodable message: ${err.message}`);
        return;
      }
      throw err;
    }
    switch (env.type) {
      case "hello":
        this.hello = env;
        this.scene.worldName = env.world_name;
        this.scene.setViewerOffset(env.viewer_offset_m);
        this.events.onReady?.(env);
        break;
      case "pose":
        this.scene.applyPose(env, this.now());
        break;
      case "ping":
        // Echo verbatim, immediately: the whole latency scheme rests on
        // this path staying short.
        this.socket.send(encodeMessage({
          type: "pong", id: env.id, t_tx_ns: env.t_tx_ns,
        }));
        this.pongsEchoed += 1;
        break;
      case "pong": {
        const sentAt = this.outstanding.get(env.id);
        if (sentAt !== undefined) {
          this.outstanding.delete(env.id);
          this.lastOneWayMs = (this.now() - sentAt) / 2;
          this.events.onLatency?.(this.lastOneWayMs);
        }
        break;
      }
      case "chunk_notice":
        break; // advisory; the binary frame that follows is authoritative
      default:
        break; // command types never arrive server->client
    }
  }

  /** Handle one incoming binary frame (length-prefixed MSH1). */
  handleBinary(data: ArrayBuffer): void {
    const errorsBefore = this.scene.decodeErrors;
    this.scene.applyChunkFrame(data);
    if (this.scene.decodeErrors > errorsBefore) {
      this.events.onError?.("dropped undecodable chunk frame");
    }
  }

  /** Client-initiated probe for the HUD latency readout. */
  sendProbe(): void {
    const id = this.nextProbeId++;
    this.outstanding.set(id, this.now());
    this.probesSent += 1;
    this.socket.send(encodeMessage({
      type: "ping", id, t_tx_ns: Math.round(this.now() * 1e6),
    }));
  }

  sendCmdVel(cmd: CmdVelMsg): void {
    this.socket.send(encodeMessage(cmd));
  }

  sendMode(cmd: ModeCommand): void {
    this.socket.send(encodeMessage({ type: cmd }));
  }
}
