import numpy as np
import pytest

from thrifty.env import EnvConfig
from thrifty.fleet import (
    STATUS_AUTONOMOUS,
    STATUS_QUEUED,
    STATUS_SERVING,
    Fleet,
    FleetConfig,
    run_fleet,
)
from thrifty.supervisors import SupervisorUnavailable


class StillPolicy:
    """Policy that never moves (keeps fleet scenarios fully scripted)."""

    def action(self, state):
        return np.zeros(2)


class ScriptedGate:
    """Requests intervention at fixed ticks; cedes after a fixed number of served steps."""

    def __init__(self, clock, request_ticks, serve_steps):
        self.clock = clock  # shared mutable {'tick': int}
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


def _still_env():
    # noise-free, start pinned far from the goal so nothing terminates
    return EnvConfig(noise_std=0.0, start_x=(0.2, 0.2), start_y=(0.2, 0.2), horizon=10_000)


def _scripted_fleet(n_robots=3, request_map=None, serve_steps=3, steps=12, freeze=True):
    env = _still_env()
    clock = {"tick": 0}
    gates = [
        ScriptedGate(clock, request_map.get(i, ()), serve_steps) if request_map else ScriptedGate(clock, (), serve_steps)
        for i in range(n_robots)
    ]
    supervisor = lambda robot_id, state: np.zeros(2)
    fleet = Fleet(
        env,
        StillPolicy(),
        gates,
        supervisor,
        FleetConfig(n_robots=n_robots, steps=steps, freeze_queued=freeze),
        np.random.default_rng(0),
    )
    return fleet, clock


def test_scripted_scenario_requests_at_ticks_3_and_4():
    # robot 1 requests at tick 3 and is served ticks 3-5 (cedes after 3 actions);
    # robot 2 requests at tick 4, waits ticks 4-5, and is served from tick 6
    fleet, clock = _scripted_fleet(request_map={1: (3,), 2: (4,)}, serve_steps=3, steps=0)
    serving_by_tick = {}
    for tick in range(8):
        clock["tick"] = tick
        fleet.step()
        serving_by_tick[tick] = fleet.serving if fleet.serving is not None else (
            # capture who was served during the tick even if released at its end
            None
        )
    # reconstruct service spans from action counts instead
    assert fleet.robots[1].acts_h == 3
    assert fleet.robots[2].acts_h >= 2
    assert fleet.robots[2].idle_ticks == 2


def test_scripted_scenario_service_spans_exact():
    fleet, clock = _scripted_fleet(request_map={1: (3,), 2: (4,)}, serve_steps=3, steps=0)
    served_at = {1: [], 2: []}
    for tick in range(10):
        clock["tick"] = tick
        before = {rid: fleet.robots[rid].acts_h for rid in (1, 2)}
        fleet.step()
        for rid in (1, 2):
            if fleet.robots[rid].acts_h > before[rid]:
                served_at[rid].append(tick)
    assert served_at[1] == [3, 4, 5]
    assert served_at[2] == [6, 7, 8]
    assert fleet.robots[2].idle_ticks == 2
    assert fleet.robots[0].idle_ticks == 0


def test_empty_queue_all_advance_autonomously():
    fleet, clock = _scripted_fleet(request_map={}, steps=0)
    fleet.step()
    assert all(r.acts_r == 1 for r in fleet.robots)
    assert all(r.acts_h == 0 for r in fleet.robots)
    assert fleet.queue == type(fleet.queue)()


def test_simultaneous_requests_enqueue_in_id_order():
    # robots 2 and 0 request at the same tick; id order means 0 enqueues first
    fleet, clock = _scripted_fleet(request_map={0: (0,), 2: (0,)}, serve_steps=2, steps=0)
    clock["tick"] = 0
    fleet.step()
    assert fleet.serving == 0
    assert list(fleet.queue) == [2]


def test_queued_robots_freeze_and_accrue_idle():
    fleet, clock = _scripted_fleet(request_map={0: (0,), 1: (0,)}, serve_steps=100, steps=0)
    clock["tick"] = 0
    for tick in range(5):
        clock["tick"] = tick
        fleet.step()
    r1 = fleet.robots[1]
    assert r1.status == STATUS_QUEUED
    assert r1.idle_ticks == 5
    assert r1.acts_r == 0 and r1.acts_h == 0
    assert r1.episode_step == 0  # frozen episode clock


def test_keep_acting_flag_lets_queued_robots_move():
    fleet, clock = _scripted_fleet(request_map={0: (0,), 1: (0,)}, serve_steps=100, steps=0, freeze=False)
    for tick in range(4):
        clock["tick"] = tick
        fleet.step()
    r1 = fleet.robots[1]
    assert r1.status == STATUS_QUEUED
    assert r1.acts_r == 4  # still acting autonomously while waiting
    assert r1.idle_ticks == 4  # but still waiting for the supervisor


def test_one_supervisor_action_per_tick_conservation():
    fleet, clock = _scripted_fleet(request_map={0: (0,), 1: (1,), 2: (2,)}, serve_steps=4, steps=0)
    total_before = 0
    for tick in range(12):
        clock["tick"] = tick
        fleet.step()
        total_h = sum(r.acts_h for r in fleet.robots)
        assert total_h - total_before in (0, 1)
        total_before = total_h


def test_episode_completion_resets_without_disturbing_queue():
    env = EnvConfig(noise_std=0.0, start_x=(0.88, 0.88), start_y=(0.5, 0.5), horizon=50)
    clock = {"tick": 0}
    gates = [ScriptedGate(clock, (), 3) for _ in range(3)]
    fleet = Fleet(
        env,
        StillPolicy(),
        gates,
        lambda rid, s: np.zeros(2),
        FleetConfig(n_robots=3, steps=0),
        np.random.default_rng(0),
    )
    # all robots start inside the goal disc: first step completes an episode
    events = fleet.step()
    assert sum(1 for e in events if e["type"] == "episode_end") == 3
    assert all(e["success"] for e in events if e["type"] == "episode_end")
    assert fleet.metrics().throughput == 3


def test_mid_service_completion_releases_supervisor():
    env = EnvConfig(noise_std=0.0, start_x=(0.88, 0.88), start_y=(0.5, 0.5), horizon=50)
    clock = {"tick": 0}
    gates = [ScriptedGate(clock, (0,), 100) if i == 0 else ScriptedGate(clock, (), 3) for i in range(2)]
    fleet = Fleet(
        env,
        StillPolicy(),
        gates,
        lambda rid, s: np.zeros(2),
        FleetConfig(n_robots=2, steps=0),
        np.random.default_rng(0),
    )
    clock["tick"] = 0
    fleet.step()  # robot 0 requests, is served, and completes (starts in goal)
    assert fleet.serving is None
    assert fleet.robots[0].status == STATUS_AUTONOMOUS
    assert fleet.robots[0].successes == 1


class AlwaysEngageGate:
    def reset_episode(self):
        pass

    def decide_entry(self, state, a_r):
        return "external"

    def decide_exit(self, state, a_r, a_h):
        return False


def test_oracle_served_fleet_never_fails_completed_episodes():
    # noise-free fleet where every robot immediately requests help and the
    # oracle serves the queue: any episode that finishes within the run
    # succeeds (queued robots freeze, so only served robots finish)
    from thrifty.supervisors import OracleConfig, oracle_action

    env = EnvConfig(noise_std=0.0, horizon=60)
    oracle = OracleConfig()
    fleet = Fleet(
        env,
        StillPolicy(),
        [AlwaysEngageGate() for _ in range(3)],
        lambda rid, s: oracle_action(oracle, env, s),
        FleetConfig(n_robots=3, steps=200),
        np.random.default_rng(4),
    )
    m = run_fleet(fleet)
    assert m.throughput >= 1
    for robot in fleet.robots:
        assert robot.successes == robot.episodes_done  # no completed episode failed


def test_zero_steps_all_zero_metrics():
    fleet, _ = _scripted_fleet(request_map={}, steps=0)
    m = run_fleet(fleet)
    assert m.throughput == 0 and m.total_ints == 0
    assert m.total_acts_h == 0 and m.total_acts_r == 0
    assert m.ticks == 0


def test_supervisor_unavailable_releases_queue():
    def broken_supervisor(rid, s):
        raise SupervisorUnavailable("gone")

    env = _still_env()
    clock = {"tick": 0}
    gates = [ScriptedGate(clock, (0,), 5) for _ in range(2)]
    fleet = Fleet(env, StillPolicy(), gates, broken_supervisor, FleetConfig(n_robots=2, steps=0), np.random.default_rng(0))
    clock["tick"] = 0
    events = fleet.step()
    assert any(e["type"] == "error" for e in events)
    assert fleet.serving is None
    assert not fleet.supervisor_available
    clock["tick"] = 1
    fleet.step()  # continues autonomously without raising
    assert all(r.status == STATUS_AUTONOMOUS for r in fleet.robots)


def test_snapshot_shape():
    fleet, clock = _scripted_fleet(request_map={1: (0,)}, steps=0)
    clock["tick"] = 0
    fleet.step()
    snap = fleet.snapshot()
    assert snap["tick"] == 1
    assert len(snap["robots"]) == 3
    assert snap["serving"] == 1
    for robot in snap["robots"]:
        assert set(robot) >= {"id", "state", "status", "episode_step"}
