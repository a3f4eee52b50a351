"""Remote supervision gateway: newline-delimited JSON over a persistent TCP socket.

The simulation thread owns all state and pushes per-tick updates through
the gateway; exactly one human client may hold the supervisor role. Human
actions land in an at-most-one-pending mailbox per robot (latest wins) that
the simulation blocks on while a robot is being served. A heartbeat goes
out every two seconds. Client disconnect closes the mailbox, which
surfaces to the simulation as a supervisor-unavailable condition.
"""

from __future__ import annotations

import json
import logging
import os
import socket
import threading

import numpy as np

from .env import EnvConfig
from .supervisors import ActionMailbox

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
DEFAULT_ADDR_ENV = "THRIFTY_GATEWAY_ADDR"

MSG_TYPES = (
    "hello",
    "state_update",
    "intervention_request",
    "human_action",
    "cede_notice",
    "episode_end",
    "heartbeat",
    "error",
)


def default_bind_addr() -> tuple[str, int]:
    raw = os.environ.get(DEFAULT_ADDR_ENV, "127.0.0.1:7787")
    host, _, port = raw.rpartition(":")
    return host or "127.0.0.1", int(port)


def geometry_payload(env: EnvConfig) -> dict:
    """Arena geometry shipped in the hello so clients carry no constants."""
    return {
        "wall_x_band": list(env.wall_x_band),
        "gap_y": list(env.gap_y),
        "goal_center": list(env.goal_center),
        "goal_radius": env.goal_radius,
        "action_max": env.action_max,
        "horizon": env.horizon,
    }


class _Session:
    """One connected client: line reader, guarded writer, role bookkeeping."""

    def __init__(self, conn: socket.socket, addr):
        self.conn = conn
        self.addr = addr
        self.reader = conn.makefile("r", encoding="utf-8", newline="\n")
        self.write_lock = threading.Lock()
        self.hello_ok = False
        self.closed = False

    def send(self, msg: dict) -> bool:
        try:
            data = (json.dumps(msg) + "\n").encode()
            with self.write_lock:
                self.conn.sendall(data)
            return True
        except OSError:
            return False

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        try:
            self.conn.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.conn.close()
        except OSError:
            pass


class GatewayServer:
    """TCP NDJSON gateway bound to a simulation's tick loop.

    The server never injects actions itself: it forwards validated
    human_action messages into the mailbox consumed by a RemoteSupervisor.
    """

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        env: EnvConfig | None = None,
        n_robots: int = 1,
        heartbeat_interval: float = 2.0,
    ):
        self.host = host
        self.port = port
        self.env = env or EnvConfig()
        self.n_robots = n_robots
        self.heartbeat_interval = heartbeat_interval
        self.mailbox = ActionMailbox()
        self.tick = 0
        self._session: _Session | None = None
        self._session_lock = threading.Lock()
        self._server_sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()
        self.on_connect = None  # optional callback(session)
        self.on_disconnect = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> tuple[str, int]:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, self.port))
        sock.listen(4)
        self._server_sock = sock
        self.address = sock.getsockname()
        accept = threading.Thread(target=self._accept_loop, name="gateway-accept", daemon=True)
        beat = threading.Thread(target=self._heartbeat_loop, name="gateway-heartbeat", daemon=True)
        self._threads = [accept, beat]
        accept.start()
        beat.start()
        log.info("gateway listening on %s:%d", *self.address)
        return self.address

    def stop(self) -> None:
        self._stopping.set()
        self.mailbox.close()
        with self._session_lock:
            if self._session is not None:
                self._session.close()
                self._session = None
        if self._server_sock is not None:
            try:
                self._server_sock.close()
            except OSError:
                pass
        for t in self._threads:
            t.join(timeout=2.0)

    # -- outgoing ------------------------------------------------------------

    def _message(self, msg_type: str, robot_id: int | None = None, payload: dict | None = None) -> dict:
        msg = {"type": msg_type, "tick": self.tick, "payload": payload or {}}
        if robot_id is not None:
            msg["robot_id"] = robot_id
        return msg

    def send(self, msg_type: str, robot_id: int | None = None, payload: dict | None = None) -> None:
        with self._session_lock:
            session = self._session
        if session is None or not session.hello_ok:
            return
        if not session.send(self._message(msg_type, robot_id, payload)):
            self._drop_session(session, reason="write failed")

    def broadcast_tick(self, snapshot: dict, events: list[dict]) -> None:
        """Send one state_update per robot plus this tick's event messages."""
        self.tick = snapshot["tick"]
        queue = snapshot.get("queue", [])
        serving = snapshot.get("serving")
        for robot in snapshot["robots"]:
            payload = {
                "state": robot["state"],
                "mode": robot["status"],
                "episode_step": robot["episode_step"],
                "queue": queue,
                "serving": serving,
            }
            for key in ("novelty", "risk"):
                if key in robot:
                    payload[key] = robot[key]
            self.send("state_update", robot_id=robot["id"], payload=payload)
        for event in events:
            etype = event.get("type")
            if etype in ("intervention_request", "cede_notice", "episode_end", "error"):
                payload = {k: v for k, v in event.items() if k not in ("type", "robot_id")}
                self.send(etype, robot_id=event.get("robot_id"), payload=payload)

    # -- incoming ------------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, addr = self._server_sock.accept()
            except OSError:
                return
            session = _Session(conn, addr)
            with self._session_lock:
                if self._session is not None:
                    session.send(
                        self._message("error", payload={"reason": "supervisor role already held"})
                    )
                    session.close()
                    continue
                self._session = session
            handler = threading.Thread(
                target=self._client_loop, args=(session,), name="gateway-client", daemon=True
            )
            handler.start()

    def _client_loop(self, session: _Session) -> None:
        hello = self._message(
            "hello",
            payload={
                "protocol_version": PROTOCOL_VERSION,
                "geometry": geometry_payload(self.env),
                "n_robots": self.n_robots,
            },
        )
        if not session.send(hello):
            self._drop_session(session, reason="hello write failed")
            return
        try:
            for line in session.reader:
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError as exc:
                    session.send(self._message("error", payload={"reason": f"malformed JSON: {exc.msg}"}))
                    self._drop_session(session, reason="malformed JSON")
                    return
                if not self._handle_message(session, msg):
                    return
        except OSError:
            pass
        finally:
            self._drop_session(session, reason="client disconnected")

    def _handle_message(self, session: _Session, msg: dict) -> bool:
        msg_type = msg.get("type")
        if msg_type == "hello":
            version = msg.get("payload", {}).get("protocol_version", msg.get("protocol_version"))
            if version != PROTOCOL_VERSION:
                session.send(
                    self._message(
                        "error",
                        payload={
                            "reason": f"protocol_version mismatch: client {version}, server {PROTOCOL_VERSION}"
                        },
                    )
                )
                self._drop_session(session, reason="version mismatch")
                return False
            session.hello_ok = True
            self.mailbox.reopen()
            if self.on_connect is not None:
                self.on_connect(session)
            return True
        if not session.hello_ok:
            session.send(self._message("error", payload={"reason": "hello required before other messages"}))
            self._drop_session(session, reason="no hello")
            return False
        if msg_type == "human_action":
            payload = msg.get("payload", {})
            robot_id = msg.get("robot_id")
            action = payload.get("action")
            if robot_id is None or action is None or len(action) != 2:
                session.send(self._message("error", payload={"reason": "human_action needs robot_id and a 2-component action"}))
                return True
            try:
                self.mailbox.post(int(robot_id), np.asarray(action, dtype=np.float64))
            except (TypeError, ValueError):
                session.send(self._message("error", payload={"reason": "non-numeric action"}))
            return True
        if msg_type == "heartbeat":
            return True
        # unknown message types are ignored for forward compatibility
        log.info("ignoring message type %r", msg_type)
        return True

    def _drop_session(self, session: _Session, reason: str) -> None:
        session.close()
        with self._session_lock:
            if self._session is session:
                self._session = None
        # unblock any tick waiting on a human action
        self.mailbox.close()
        if self.on_disconnect is not None:
            self.on_disconnect(reason)
        log.info("session dropped: %s", reason)

    def _heartbeat_loop(self) -> None:
        while not self._stopping.wait(self.heartbeat_interval):
            self.send("heartbeat")

    @property
    def has_client(self) -> bool:
        with self._session_lock:
            return self._session is not None and self._session.hello_ok

    def wait_for_client(self, timeout: float | None = None) -> bool:
        import time

        deadline = None if timeout is None else time.monotonic() + timeout
        while not self.has_client:
            if self._stopping.is_set():
                return False
            if deadline is not None and time.monotonic() > deadline:
                return False
            threading.Event().wait(0.05)
        return True
