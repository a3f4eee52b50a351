"""Multi-robot supervision: lockstep stepping, FIFO intervention queue, idle time.

All robots advance one action per tick; a single supervisor serves the
head of the intervention queue, one action per tick. Robots waiting in
the queue freeze by default (their episode clock pauses) and accrue idle
time until served. Same-tick requests enqueue in ascending robot id.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import env as envmod
from .env import EnvConfig
from .supervisors import SupervisorUnavailable

STATUS_AUTONOMOUS = "autonomous"
STATUS_QUEUED = "queued"
STATUS_SERVING = "serving"


@dataclass
class RobotState:
    robot_id: int
    state: np.ndarray
    status: str = STATUS_AUTONOMOUS
    episode_step: int = 0
    episodes_done: int = 0
    successes: int = 0
    idle_ticks: int = 0
    acts_h: int = 0
    acts_r: int = 0
    ints: int = 0


@dataclass
class FleetConfig:
    n_robots: int = 3
    steps: int = 350
    freeze_queued: bool = True

    def __post_init__(self):
        if self.n_robots < 1:
            raise ValueError("need at least one robot")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


@dataclass
class FleetMetrics:
    throughput: int
    total_ints: int
    total_acts_h: int
    total_acts_r: int
    mean_idle: float
    ticks: int
    per_robot: list[dict]


class Fleet:
    """Lockstep fleet with one shared supervisor and per-robot gates.

    ``supervisor_fn(robot_id, state) -> action`` serves the current queue
    head; ``gates[i]`` owns robot i's switching decisions. Policies may be
    shared (one EnsemblePolicy) or per-robot (a list).
    """

    def __init__(
        self,
        env_config: EnvConfig,
        policies,
        gates: list,
        supervisor_fn,
        config: FleetConfig,
        rng: np.random.Generator,
    ):
        self.env_config = env_config
        if not isinstance(policies, (list, tuple)):
            policies = [policies] * config.n_robots  # one shared policy object
        if len(policies) != config.n_robots or len(gates) != config.n_robots:
            raise ValueError("need one policy and one gate per robot")
        self.policies = policies
        self.gates = gates
        self.supervisor_fn = supervisor_fn
        self.config = config
        self.rng = rng
        self.robots = [RobotState(i, envmod.reset(env_config, rng)) for i in range(config.n_robots)]
        self.queue: deque[int] = deque()
        self.serving: int | None = None
        self.tick = 0
        self.supervisor_available = True
        for g in gates:
            g.reset_episode()

    # -- episode bookkeeping -------------------------------------------------

    def _finish_episode(self, robot: RobotState, success: bool, events: list[dict]) -> None:
        robot.episodes_done += 1
        robot.successes += int(success)
        events.append({"type": "episode_end", "robot_id": robot.robot_id, "success": success})
        if self.serving == robot.robot_id:
            self.serving = None  # finishing mid-service releases the supervisor immediately
        if robot.robot_id in self.queue:
            self.queue.remove(robot.robot_id)
        robot.status = STATUS_AUTONOMOUS
        robot.state = envmod.reset(self.env_config, self.rng)
        robot.episode_step = 0
        self.gates[robot.robot_id].reset_episode()

    def _advance(self, robot: RobotState, action: np.ndarray, events: list[dict]) -> None:
        """Execute one action for a robot and handle terminal/timeout resets."""
        flag = envmod.goal_indicator(self.env_config, robot.state)
        nxt, _ = envmod.step(self.env_config, robot.state, action, self.rng)
        robot.episode_step += 1
        if flag:
            self._finish_episode(robot, success=True, events=events)
        elif robot.episode_step >= self.env_config.horizon:
            self._finish_episode(robot, success=False, events=events)
        else:
            robot.state = nxt

    def release_supervision(self) -> None:
        """Drop all pending/active interventions; remaining robots run autonomously."""
        for rid in list(self.queue):
            self.robots[rid].status = STATUS_AUTONOMOUS
        self.queue.clear()
        if self.serving is not None:
            self.robots[self.serving].status = STATUS_AUTONOMOUS
            self.serving = None
        self.supervisor_available = False

    def reopen_supervision(self) -> None:
        self.supervisor_available = True

    # -- one lockstep tick ---------------------------------------------------

    def step(self) -> list[dict]:
        """Advance the fleet one tick; returns the tick's event list."""
        events: list[dict] = []

        # 1. gate evaluation in ascending robot id (documented tie-break)
        if self.supervisor_available:
            for robot in self.robots:
                if robot.status != STATUS_AUTONOMOUS:
                    continue
                a_r = self.policies[robot.robot_id].action(robot.state)
                cause = self.gates[robot.robot_id].decide_entry(robot.state, a_r)
                if cause is not None:
                    robot.status = STATUS_QUEUED
                    robot.ints += 1
                    self.queue.append(robot.robot_id)
                    events.append(
                        {"type": "intervention_request", "robot_id": robot.robot_id, "cause": cause}
                    )

        # 2. promotion: a free supervisor picks up the queue head this tick
        if self.serving is None and self.queue:
            rid = self.queue.popleft()
            self.serving = rid
            self.robots[rid].status = STATUS_SERVING

        # 3. actions
        for robot in self.robots:
            if robot.status == STATUS_SERVING:
                a_r = self.policies[robot.robot_id].action(robot.state)
                try:
                    a_h = np.asarray(self.supervisor_fn(robot.robot_id, robot.state), dtype=np.float64)
                except SupervisorUnavailable:
                    events.append({"type": "error", "robot_id": robot.robot_id, "reason": "supervisor unavailable"})
                    self.release_supervision()
                    continue
                robot.acts_h += 1
                state_before = robot.state
                self._advance(robot, a_h, events)
                if robot.status == STATUS_SERVING and self.gates[robot.robot_id].decide_exit(
                    state_before, a_r, a_h
                ):
                    robot.status = STATUS_AUTONOMOUS
                    self.serving = None
                    events.append({"type": "cede_notice", "robot_id": robot.robot_id})
            elif robot.status == STATUS_QUEUED:
                robot.idle_ticks += 1
                if not self.config.freeze_queued:
                    a_r = self.policies[robot.robot_id].action(robot.state)
                    robot.acts_r += 1
                    self._advance(robot, a_r, events)
            else:
                a_r = self.policies[robot.robot_id].action(robot.state)
                robot.acts_r += 1
                self._advance(robot, a_r, events)

        self.tick += 1
        return events

    def snapshot(self) -> dict:
        """Tick-by-tick trace record (JSONL-friendly)."""
        robots = []
        for robot in self.robots:
            entry = {
                "id": robot.robot_id,
                "state": [float(robot.state[0]), float(robot.state[1])],
                "status": robot.status,
                "episode_step": robot.episode_step,
            }
            gate = self.gates[robot.robot_id]
            if hasattr(gate, "scores"):
                entry.update(gate.scores(robot.state))
            robots.append(entry)
        return {
            "tick": self.tick,
            "robots": robots,
            "queue": list(self.queue),
            "serving": self.serving,
        }

    def metrics(self) -> FleetMetrics:
        return FleetMetrics(
            throughput=sum(r.successes for r in self.robots),
            total_ints=sum(r.ints for r in self.robots),
            total_acts_h=sum(r.acts_h for r in self.robots),
            total_acts_r=sum(r.acts_r for r in self.robots),
            mean_idle=float(np.mean([r.idle_ticks for r in self.robots])),
            ticks=self.tick,
            per_robot=[
                {
                    "id": r.robot_id,
                    "successes": r.successes,
                    "episodes": r.episodes_done,
                    "ints": r.ints,
                    "acts_h": r.acts_h,
                    "acts_r": r.acts_r,
                    "idle_ticks": r.idle_ticks,
                }
                for r in self.robots
            ],
        )


def fleet_step(fleet: Fleet) -> Fleet:
    """Advance one tick (spec-level operation); state lives on the fleet object."""
    fleet.step()
    return fleet


def run_fleet(fleet: Fleet, trace_sink=None) -> FleetMetrics:
    """Run the configured number of ticks, optionally streaming trace records."""
    if trace_sink is not None:
        trace_sink(fleet.snapshot(), [])
    for _ in range(fleet.config.steps):
        events = fleet.step()
        if trace_sink is not None:
            trace_sink(fleet.snapshot(), events)
    return fleet.metrics()
