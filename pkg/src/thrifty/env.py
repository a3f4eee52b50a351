"""Desk-scale 2D navigation MDP with a walled bottleneck and a disc goal.

The arena is the unit square. A vertical wall band blocks passage except
through a gap; the episode succeeds once the agent enters the goal disc.
All dynamics are pure functions of (config, state, rng) so environments
can be stepped independently from any thread.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

State = np.ndarray  # shape (2,), float64
Action = np.ndarray  # shape (2,), float64


@dataclass(frozen=True)
class EnvConfig:
    wall_x_band: tuple[float, float] = (0.49, 0.51)
    gap_y: tuple[float, float] = (0.45, 0.55)
    goal_center: tuple[float, float] = (0.9, 0.5)
    goal_radius: float = 0.05
    action_max: float = 0.05
    noise_std: float = 0.005
    horizon: int = 100
    start_x: tuple[float, float] = (0.05, 0.2)
    start_y: tuple[float, float] = (0.1, 0.9)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        # goal disc must stay clear of the wall band
        if self.goal_center[0] - self.goal_radius <= self.wall_x_band[1]:
            raise ValueError("goal disc overlaps the wall band")


def reset(config: EnvConfig, rng: np.random.Generator) -> State:
    """Uniform start in the start region."""
    x = rng.uniform(config.start_x[0], config.start_x[1])
    y = rng.uniform(config.start_y[0], config.start_y[1])
    return np.array([x, y])


def clip_action(config: EnvConfig, action: Action) -> Action:
    a = np.asarray(action, dtype=np.float64)
    return np.clip(a, -config.action_max, config.action_max)


def goal_indicator(config: EnvConfig, state: State) -> int:
    """1 iff the state is within goal_radius of the goal center (boundary inclusive).

    A tiny tolerance keeps the inclusive boundary decision stable under
    float representation of coordinates sitting exactly on the circle.
    """
    dx = state[0] - config.goal_center[0]
    dy = state[1] - config.goal_center[1]
    return 1 if dx * dx + dy * dy <= config.goal_radius**2 + 1e-12 else 0


def _resolve_wall(config: EnvConfig, x_old: float, x_new: float, y_new: float) -> float:
    """Clamp x to the near wall face when the motion would enter or cross the band off-gap."""
    lo, hi = config.wall_x_band
    if config.gap_y[0] <= y_new <= config.gap_y[1]:
        return x_new
    if x_old <= lo:
        return lo if x_new > lo else x_new
    if x_old >= hi:
        return hi if x_new < hi else x_new
    # started strictly inside the band (entered through the gap earlier):
    # eject to the nearer face
    return lo if x_old <= (lo + hi) / 2.0 else hi


def step(
    config: EnvConfig,
    state: State,
    action: Action,
    rng: np.random.Generator | None = None,
) -> tuple[State, bool]:
    """Apply a clipped action plus Gaussian process noise; returns (next_state, reached_goal)."""
    a = np.asarray(action, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite action {action}")
    a = clip_action(config, a)
    motion = a.copy()
    if config.noise_std > 0 and rng is not None:
        motion = motion + rng.normal(0.0, config.noise_std, size=2)
    raw = state + motion
    y_new = float(np.clip(raw[1], 0.0, 1.0))
    x_new = _resolve_wall(config, float(state[0]), float(raw[0]), y_new)
    x_new = float(np.clip(x_new, 0.0, 1.0))
    nxt = np.array([x_new, y_new])
    return nxt, bool(goal_indicator(config, nxt))


def run_episode(
    config: EnvConfig,
    controller,
    rng: np.random.Generator,
    start: State | None = None,
) -> tuple[list[tuple[State, Action, State, int]], bool]:
    """Roll one episode under ``controller(state) -> action``.

    Steps are recorded as (state, action, next_state, goal_flag-of-state).
    The episode ends at the first recorded step taken from inside the goal
    set (that terminal step is recorded, giving the critic its goal-flagged
    anchors) or after ``horizon`` steps. Returns (steps, success).
    """
    s = reset(config, rng) if start is None else np.asarray(start, dtype=np.float64)
    steps: list[tuple[State, Action, State, int]] = []
    success = False
    for _ in range(config.horizon):
        flag = goal_indicator(config, s)
        a = np.asarray(controller(s), dtype=np.float64)
        nxt, reached = step(config, s, a, rng)
        steps.append((s, a, nxt, flag))
        if flag:
            success = True
            break
        s = nxt
    else:
        # horizon exhausted; goal entered on the very last transition still counts
        if steps and goal_indicator(config, steps[-1][2]):
            success = True
    return steps, success
