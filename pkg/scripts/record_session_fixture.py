"""Record a gateway session transcript for the dashboard protocol tests.

Runs the scripted 3-robot fleet scenario (intervention requests at ticks 3
and 4, three supervisor actions each) against a real gateway socket and
captures every server-to-client line verbatim into
frontend/tests/fixtures/session.jsonl. The scripted client answers each
intervention prompt with a fixed rightward action.
"""

import json
import socket
import threading
from pathlib import Path

import numpy as np

from thrifty.env import EnvConfig
from thrifty.fleet import Fleet, FleetConfig
from thrifty.gateway import GatewayServer
from thrifty.supervisors import RemoteSupervisor

OUT = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures" / "session.jsonl"


class ScriptedGate:
    def __init__(self, clock, request_ticks, serve_steps=3):
        self.clock = clock
        self.request_ticks = set(request_ticks)
        self.serve_steps = serve_steps
        self.served = 0

    def reset_episode(self):
        pass

    def decide_entry(self, state, a_r):
        return "external" if self.clock["tick"] in self.request_ticks else None

    def decide_exit(self, state, a_r, a_h):
        self.served += 1
        if self.served >= self.serve_steps:
            self.served = 0
            return True
        return False


class StillPolicy:
    def action(self, state):
        return np.zeros(2)


def main():
    env = EnvConfig(noise_std=0.0, start_x=(0.2, 0.2), start_y=(0.2, 0.2), horizon=10_000)
    server = GatewayServer(port=0, env=env, n_robots=3, heartbeat_interval=60.0)
    server.start()

    clock = {"tick": 0}
    gates = [ScriptedGate(clock, ()), ScriptedGate(clock, (3,)), ScriptedGate(clock, (4,))]
    remote = RemoteSupervisor(server.mailbox, env, timeout=10.0)

    def supervisor_fn(robot_id, state):
        server.send("intervention_request", robot_id=robot_id,
                    payload={"state": [float(state[0]), float(state[1])]})
        return remote.remote_action(robot_id, state)

    fleet = Fleet(env, StillPolicy(), gates, supervisor_fn,
                  FleetConfig(n_robots=3, steps=0), np.random.default_rng(0))

    lines = []

    def client_thread():
        sock = socket.create_connection(server.address, timeout=10.0)
        sock.sendall((json.dumps({"type": "hello", "tick": 0,
                                  "payload": {"protocol_version": 1}}) + "\n").encode())
        reader = sock.makefile("r", encoding="utf-8", newline="\n")
        for line in reader:
            line = line.strip()
            if not line:
                continue
            lines.append(line)
            msg = json.loads(line)
            if msg["type"] == "intervention_request":
                sock.sendall((json.dumps({
                    "type": "human_action", "tick": msg["tick"],
                    "robot_id": msg["robot_id"], "payload": {"action": [0.04, 0.0]},
                }) + "\n").encode())

    t = threading.Thread(target=client_thread, daemon=True)
    t.start()
    server.wait_for_client(timeout=5.0)

    for tick in range(10):
        clock["tick"] = tick
        events = fleet.step()
        server.broadcast_tick(fleet.snapshot(), events)

    import time

    time.sleep(0.5)  # let the last lines flush to the client
    server.stop()

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")
    types = [json.loads(l)["type"] for l in lines]
    print(f"wrote {len(lines)} messages to {OUT}")
    print("message types:", {t: types.count(t) for t in sorted(set(types))})


if __name__ == "__main__":
    main()
