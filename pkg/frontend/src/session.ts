// Supervision session state: everything the dashboard renders, updated
// only from received wire messages. Keyboard input turns into
// human_action messages strictly while the focused robot is under
// supervisor control and this client holds the supervisor role.

import { keysToAction } from "./keyboard.js";
import { Geometry, PROTOCOL_VERSION, WireMessage, helloMessage } from "./protocol.js";

export type ConnectionStatus =
  | "connecting"
  | "connected"
  | "version-mismatch"
  | "error"
  | "closed";

export interface RobotPanel {
  id: number;
  position: [number, number];
  mode: string; // autonomous | queued | serving | supervisor
  episodeStep: number;
  novelty?: number;
  risk?: number;
  lastTick: number;
}

const SUPERVISOR_MODES = new Set(["serving", "supervisor"]);

export class Session {
  status: ConnectionStatus = "connecting";
  geometry: Geometry | null = null;
  nRobots = 0;
  robots = new Map<number, RobotPanel>();
  queue: number[] = [];
  serving: number | null = null;
  focus: number | null = null;
  alerts = new Set<number>();
  waitTicks = new Map<number, number>();
  lastTick = 0;
  errorMessage: string | null = null;
  private lastQueueTick = -1;

  constructor(private send: (msg: WireMessage) => void) {}

  /** Feed one received message; all view state changes happen here. */
  handle(msg: WireMessage): void {
    switch (msg.type) {
      case "hello":
        this.onHello(msg);
        break;
      case "state_update":
        this.onStateUpdate(msg);
        break;
      case "intervention_request":
        this.onInterventionRequest(msg);
        break;
      case "cede_notice":
        this.onCede(msg);
        break;
      case "episode_end":
        this.onEpisodeEnd(msg);
        break;
      case "error":
        this.status = "error";
        this.errorMessage = String(msg.payload.reason ?? "unknown gateway error");
        break;
      case "heartbeat":
        break; // liveness only
      default:
        break;
    }
    if (msg.tick > this.lastTick) this.lastTick = msg.tick;
  }

  private onHello(msg: WireMessage): void {
    const version = msg.payload.protocol_version;
    if (version !== PROTOCOL_VERSION) {
      this.status = "version-mismatch";
      this.errorMessage = `gateway speaks protocol ${String(version)}, this client speaks ${PROTOCOL_VERSION}`;
      return;
    }
    this.geometry = msg.payload.geometry as unknown as Geometry;
    this.nRobots = Number(msg.payload.n_robots ?? 0);
    this.status = "connected";
    this.send(helloMessage());
  }

  private onStateUpdate(msg: WireMessage): void {
    if (msg.robot_id === undefined) return;
    const existing = this.robots.get(msg.robot_id);
    if (existing && msg.tick < existing.lastTick) return; // stale update
    const p = msg.payload;
    this.robots.set(msg.robot_id, {
      id: msg.robot_id,
      position: p.state as [number, number],
      mode: String(p.mode ?? "autonomous"),
      episodeStep: Number(p.episode_step ?? 0),
      novelty: typeof p.novelty === "number" ? p.novelty : undefined,
      risk: typeof p.risk === "number" ? p.risk : undefined,
      lastTick: msg.tick,
    });
    if (Array.isArray(p.queue)) {
      this.queue = p.queue as number[];
      if (msg.tick > this.lastQueueTick) {
        // one new tick: everyone still enqueued waited one more tick
        for (const rid of this.queue) {
          this.waitTicks.set(rid, (this.waitTicks.get(rid) ?? 0) + 1);
        }
        this.lastQueueTick = msg.tick;
      }
    }
    this.serving = (p.serving ?? null) as number | null;
    if (this.serving !== null) this.focus = this.serving;
  }

  private onInterventionRequest(msg: WireMessage): void {
    if (msg.robot_id === undefined) return;
    this.alerts.add(msg.robot_id);
    // focus the robot being served, else the requester
    this.focus = this.serving ?? msg.robot_id;
  }

  private onCede(msg: WireMessage): void {
    if (msg.robot_id === undefined) return;
    this.alerts.delete(msg.robot_id);
    this.waitTicks.delete(msg.robot_id);
    if (this.focus === msg.robot_id) {
      this.focus = this.queue.length > 0 ? this.queue[0] : null;
    }
    if (this.serving === msg.robot_id) this.serving = null;
  }

  private onEpisodeEnd(msg: WireMessage): void {
    if (msg.robot_id === undefined) return;
    // a pending request can resolve itself when the episode ends first
    this.alerts.delete(msg.robot_id);
    this.waitTicks.delete(msg.robot_id);
    if (this.focus === msg.robot_id && this.serving !== msg.robot_id) {
      this.focus = this.queue.length > 0 ? this.queue[0] : null;
    }
  }

  get alertActive(): boolean {
    return this.alerts.size > 0;
  }

  /**
   * Translate currently held keys into a human_action message.
   *
   * Returns null (and sends nothing) unless connected, a robot is focused,
   * and that robot is under supervisor control: the dashboard never steers
   * autonomous robots.
   */
  keyboard(keysHeld: Iterable<string>): WireMessage | null {
    if (this.status !== "connected" || this.focus === null || this.geometry === null) return null;
    const robot = this.robots.get(this.focus);
    if (!robot || !SUPERVISOR_MODES.has(robot.mode)) return null;
    const action = keysToAction(keysHeld, this.geometry.action_max);
    if (action === null) return null;
    const msg: WireMessage = {
      type: "human_action",
      tick: this.lastTick,
      robot_id: this.focus,
      payload: { action },
    };
    this.send(msg);
    return msg;
  }
}
