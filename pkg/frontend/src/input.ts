/**
 * Gamepad to velocity-command mapping, RC mode 2: the right stick
 * commands planar velocity in the heading frame (up = forward), the
 * left stick vertical speed and yaw rate. Commands leave at a fixed
 * 20 Hz on their own timer, independent of the render loop.
 */

import { CmdVelMsg } from "./protocol.js";

export const COMMAND_RATE_HZ = 20;
export const DEADZONE = 0.1;

/** The slice of the Gamepad API the mapper reads; easy to fake in tests. */
export interface PadSnapshot {
  axes: ReadonlyArray<number>;
  buttons: ReadonlyArray<{ pressed: boolean }>;
}

export interface InputLimits {
  vMax: number;      // m/s, planar and vertical
  yawRateMax: number; // rad/s
}

// Standard-mapping indices.
const AXIS_LEFT_X = 0;   // yaw
const AXIS_LEFT_Y = 1;   // vertical (up is negative)
const AXIS_RIGHT_X = 2;  // lateral
const AXIS_RIGHT_Y = 3;  // forward (up is negative)
const BUTTON_TAKEOFF = 0; // A
const BUTTON_LAND = 1;    // B

function shaped(raw: number | undefined): number {
  const v = raw ?? 0;
  return Math.abs(v) < DEADZONE ? 0 : Math.max(-1, Math.min(1, v));
}

/** Map one pad snapshot to a cmd_vel, applying deadzone and scaling. */
export function stickToCmdVel(pad: PadSnapshot | null,
                              limits: InputLimits): CmdVelMsg {
  if (pad === null) {
    return { type: "cmd_vel", vx: 0, vy: 0, vz: 0, yaw_rate: 0 };
  }
  const forward = -shaped(pad.axes[AXIS_RIGHT_Y]);
  const right = shaped(pad.axes[AXIS_RIGHT_X]);
  const up = -shaped(pad.axes[AXIS_LEFT_Y]);
  const yawLeft = -shaped(pad.axes[AXIS_LEFT_X]);
  // The trailing +0 normalizes away negative zero from the negations.
  return {
    type: "cmd_vel",
    vx: forward * limits.vMax + 0,
    vy: -right * limits.vMax + 0,  // +vy is left in the heading frame
    vz: up * limits.vMax + 0,
    yaw_rate: yawLeft * limits.yawRateMax + 0,
  };
}

export type ModeCommand = "takeoff" | "land";

export interface CommandSink {
  sendCmdVel(cmd: CmdVelMsg): void;
  sendMode(cmd: ModeCommand): void;
}

type IntervalHandle = ReturnType<typeof setInterval>;

/**
 * Fixed-rate command pump. poll() is injected so the browser build can
 * read navigator.getGamepads() while tests feed synthetic snapshots.
 */
export class CommandLoop {
  readonly periodMs = 1000 / COMMAND_RATE_HZ;
  private timer: IntervalHandle | null = null;
  private takeoffHeld = false;
  private landHeld = false;
  sent = 0;

  constructor(private readonly poll: () => PadSnapshot | null,
              private readonly sink: CommandSink,
              public limits: InputLimits) {}

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(() => this.tick(), this.periodMs);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** One 20 Hz beat: stream cmd_vel, edge-trigger takeoff/land. */
  tick(): void {
    const pad = this.poll();
    this.sink.sendCmdVel(stickToCmdVel(pad, this.limits));
    this.sent += 1;

    const takeoff = pad?.buttons[BUTTON_TAKEOFF]?.pressed ?? false;
    const land = pad?.buttons[BUTTON_LAND]?.pressed ?? false;
    if (takeoff && !this.takeoffHeld) {
      this.sink.sendMode("takeoff");
    }
    if (land && !this.landHeld) {
      this.sink.sendMode("land");
    }
    this.takeoffHeld = takeoff;
    this.landHeld = land;
  }
}
