import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { beforeEach, describe, expect, it } from "vitest";

import { WireMessage, parseMessage } from "../src/protocol.js";
import { Session } from "../src/session.js";

const FIXTURE = join(dirname(fileURLToPath(import.meta.url)), "fixtures", "session.jsonl");

function fixtureMessages(): WireMessage[] {
  return readFileSync(FIXTURE, "utf-8")
    .split("\n")
    .filter((l) => l.trim().length > 0)
    .map((l) => {
      const msg = parseMessage(l);
      if (!msg) throw new Error(`fixture line failed to parse: ${l}`);
      return msg;
    });
}

function newSession() {
  const sent: WireMessage[] = [];
  const session = new Session((msg) => sent.push(msg));
  return { session, sent };
}

describe("recorded gateway session replay", () => {
  let messages: WireMessage[];

  beforeEach(() => {
    messages = fixtureMessages();
  });

  it("connects on the hello and answers with its own hello", () => {
    const { session, sent } = newSession();
    session.handle(messages[0]);
    expect(session.status).toBe("connected");
    expect(session.nRobots).toBe(3);
    expect(session.geometry!.goal_center).toEqual([0.9, 0.5]);
    expect(sent.length).toBe(1);
    expect(sent[0].type).toBe("hello");
  });

  it("reproduces the serving/queue sequence of the scripted scenario", () => {
    const { session } = newSession();
    const servingByTick = new Map<number, number | null>();
    const queueByTick = new Map<number, number[]>();
    for (const msg of messages) {
      session.handle(msg);
      if (msg.type === "state_update") {
        servingByTick.set(msg.tick, session.serving);
        queueByTick.set(msg.tick, [...session.queue]);
      }
    }
    // robot 1 is served while the fleet reports ticks 4-5, robot 2 at 7-8
    expect(servingByTick.get(3)).toBeNull();
    expect(servingByTick.get(4)).toBe(1);
    expect(servingByTick.get(5)).toBe(1);
    expect(servingByTick.get(6)).toBeNull();
    expect(servingByTick.get(7)).toBe(2);
    expect(servingByTick.get(8)).toBe(2);
    expect(servingByTick.get(9)).toBeNull();
    // robot 2 sat in the queue for exactly two reported ticks
    expect(queueByTick.get(5)).toEqual([2]);
    expect(queueByTick.get(6)).toEqual([2]);
    expect(queueByTick.get(7)).toEqual([]);
    expect(session.waitTicks.get(2) ?? 0).toBe(0); // cleared once served
  });

  it("moves focus with the FIFO: requester first, queue head after cede", () => {
    const { session } = newSession();
    const focusTimeline: Array<[string, number | null]> = [];
    for (const msg of messages) {
      session.handle(msg);
      if (msg.type === "intervention_request" || msg.type === "cede_notice") {
        focusTimeline.push([msg.type, session.focus]);
      }
    }
    // first request focuses robot 1; after robot 1 cedes, focus falls to
    // the queue head (robot 2), which is then served
    const first = focusTimeline[0];
    expect(first).toEqual(["intervention_request", 1]);
    const afterFirstCede = focusTimeline.find(([t]) => t === "cede_notice");
    expect(afterFirstCede).toEqual(["cede_notice", 2]);
    // alerts all cleared by the end of the replay
    expect(session.alertActive).toBe(false);
  });

  it("emits human_action only while the focused robot is under supervision", () => {
    const { session, sent } = newSession();
    const emitted: WireMessage[] = [];
    for (const msg of messages) {
      session.handle(msg);
      const out = session.keyboard(["ArrowRight"]);
      if (out) emitted.push(out);
    }
    expect(emitted.length).toBeGreaterThan(0);
    for (const msg of emitted) {
      const mode = session.robots.get(msg.robot_id!)?.mode;
      // by the end of the run all robots are autonomous again; check the
      // invariant against the panel state at emission time instead
      expect(msg.type).toBe("human_action");
    }
    // after the replay everyone is autonomous: keyboard must go silent
    expect(session.keyboard(["ArrowRight"])).toBeNull();
    // every message that went out was also passed to the transport (hello + actions)
    expect(sent.length).toBe(emitted.length + 1);
  });

  it("tracks supervision state at emission time", () => {
    const { session } = newSession();
    for (const msg of messages) {
      session.handle(msg);
      const out = session.keyboard(["ArrowUp"]);
      if (out) {
        const robot = session.robots.get(out.robot_id!);
        expect(robot).toBeDefined();
        expect(["serving", "supervisor"]).toContain(robot!.mode);
      }
    }
  });

  it("drops stale state updates", () => {
    const { session } = newSession();
    for (const msg of messages) session.handle(msg);
    const robot0 = session.robots.get(0)!;
    const beforeTick = robot0.lastTick;
    const stale: WireMessage = {
      type: "state_update",
      tick: 1,
      robot_id: 0,
      payload: { state: [0.99, 0.99], mode: "serving", episode_step: 0, queue: [], serving: null },
    };
    session.handle(stale);
    const after = session.robots.get(0)!;
    expect(after.lastTick).toBe(beforeTick);
    expect(after.position).not.toEqual([0.99, 0.99]);
  });

  it("flags a protocol version mismatch as an explicit error state", () => {
    const { session, sent } = newSession();
    const badHello: WireMessage = {
      type: "hello",
      tick: 0,
      payload: { protocol_version: 99, geometry: {}, n_robots: 1 },
    };
    session.handle(badHello);
    expect(session.status).toBe("version-mismatch");
    expect(session.errorMessage).toContain("99");
    expect(sent.length).toBe(0); // no hello reply to an incompatible server
    expect(session.keyboard(["ArrowRight"])).toBeNull();
  });

  it("clears an alert when the episode ends before the human acts", () => {
    const { session } = newSession();
    session.handle(messages[0]);
    session.handle({
      type: "state_update",
      tick: 1,
      robot_id: 0,
      payload: { state: [0.5, 0.5], mode: "queued", episode_step: 3, queue: [0], serving: null },
    });
    session.handle({ type: "intervention_request", tick: 1, robot_id: 0, payload: {} });
    expect(session.alertActive).toBe(true);
    session.handle({ type: "episode_end", tick: 2, robot_id: 0, payload: { success: true } });
    expect(session.alertActive).toBe(false);
  });
});
