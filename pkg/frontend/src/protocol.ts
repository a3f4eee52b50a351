// Wire protocol: newline-delimited JSON messages over a persistent socket.
// The gateway sends a hello first; both sides reject version mismatches.

export const PROTOCOL_VERSION = 1;

export type WireType =
  | "hello"
  | "state_update"
  | "intervention_request"
  | "human_action"
  | "cede_notice"
  | "episode_end"
  | "heartbeat"
  | "error";

export interface WireMessage {
  type: WireType;
  tick: number;
  robot_id?: number;
  payload: Record<string, unknown>;
}

export interface Geometry {
  wall_x_band: [number, number];
  gap_y: [number, number];
  goal_center: [number, number];
  goal_radius: number;
  action_max: number;
  horizon: number;
}

const KNOWN_TYPES = new Set<string>([
  "hello",
  "state_update",
  "intervention_request",
  "human_action",
  "cede_notice",
  "episode_end",
  "heartbeat",
  "error",
]);

/** Parse one line; unknown fields are ignored, malformed lines yield null. */
export function parseMessage(line: string): WireMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  if (typeof msg.type !== "string" || !KNOWN_TYPES.has(msg.type)) return null;
  if (typeof msg.tick !== "number") return null;
  return {
    type: msg.type as WireType,
    tick: msg.tick,
    robot_id: typeof msg.robot_id === "number" ? msg.robot_id : undefined,
    payload: (msg.payload as Record<string, unknown>) ?? {},
  };
}

export function helloMessage(): WireMessage {
  return { type: "hello", tick: 0, payload: { protocol_version: PROTOCOL_VERSION } };
}

export function encodeMessage(msg: WireMessage): string {
  return JSON.stringify(msg) + "\n";
}

/** Buffers stream chunks and yields complete newline-terminated lines. */
export class LineSplitter {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const lines: string[] = [];
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, idx).trim();
      this.buffer = this.buffer.slice(idx + 1);
      if (line.length > 0) lines.push(line);
    }
    return lines;
  }
}
