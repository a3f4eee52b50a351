"""Supervisor policies: scripted oracle, noisy oracle, synthetic gater, remote human.

The scripted oracle steers through the wall gap via a waypoint and is
complete on the noise-free environment. The synthetic gater automates a
human-gated supervisor's engage/disengage judgment so benchmark runs are
reproducible. The remote adapter blocks a simulation tick until a human
action arrives over the gateway.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .env import Action, EnvConfig, State, clip_action


@dataclass(frozen=True)
class OracleConfig:
    waypoint: tuple[float, float] = (0.45, 0.5)
    gap_exit: tuple[float, float] = (0.55, 0.5)
    gain: float = 1.0
    noise_std: float = 0.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


def oracle_action(config: OracleConfig, env: EnvConfig, state: State) -> Action:
    """Proportional controller: waypoint, then gap exit, then goal center.

    The gap-exit target applies only until the far wall face is cleared;
    keeping it all the way to the exit point would make the exit a fixed
    point of the proportional rule and stall noise-free trajectories.
    """
    x = state[0]
    if x < config.waypoint[0]:
        target = config.waypoint
    elif x < env.wall_x_band[1]:
        target = config.gap_exit
    else:
        target = env.goal_center
    raw = config.gain * (np.asarray(target) - state)
    return clip_action(env, raw)


def noisy_oracle_action(
    config: OracleConfig, env: EnvConfig, state: State, rng: np.random.Generator
) -> Action:
    """Oracle action plus zero-mean Gaussian per component, re-clipped."""
    a = oracle_action(config, env, state)
    if config.noise_std > 0:
        a = a + rng.normal(0.0, config.noise_std, size=2)
    return clip_action(env, a)


@dataclass(frozen=True)
class SyntheticGaterConfig:
    engage_discrepancy: float = 0.01  # squared L2
    disengage_factor: float = 0.25
    patience: int = 3

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0 < self.disengage_factor < 1:
            raise ValueError("disengage threshold must be below the engage threshold")


ENGAGE = "engage"
STAY = "stay"
DISENGAGE = "disengage"


@dataclass
class SyntheticGater:
    """Stand-in for a human deciding when to take and release control.

    Engages when robot/supervisor actions diverge beyond the engage
    threshold; releases only after ``patience`` consecutive calm steps
    below the (stricter) disengage threshold.
    """

    config: SyntheticGaterConfig = field(default_factory=SyntheticGaterConfig)
    engaged: bool = False
    calm_steps: int = 0

    def reset(self) -> None:
        self.engaged = False
        self.calm_steps = 0

    def decide(self, robot_action: Action, oracle_action: Action) -> str:
        diff = np.asarray(robot_action, dtype=np.float64) - np.asarray(oracle_action, dtype=np.float64)
        d = float(diff @ diff)
        if not self.engaged:
            if d > self.config.engage_discrepancy:
                self.engaged = True
                self.calm_steps = 0
                return ENGAGE
            return STAY
        if d < self.config.disengage_factor * self.config.engage_discrepancy:
            self.calm_steps += 1
            if self.calm_steps >= self.config.patience:
                self.engaged = False
                self.calm_steps = 0
                return DISENGAGE
        else:
            self.calm_steps = 0
        return STAY


class SupervisorUnavailable(RuntimeError):
    """Raised when a remote supervisor session closes mid-episode."""


class ActionMailbox:
    """At-most-one pending human action per robot; the latest message wins."""

    def __init__(self):
        self._cond = threading.Condition()
        self._pending: dict[int, np.ndarray] = {}
        self._closed = False

    def post(self, robot_id: int, action: Action) -> None:
        with self._cond:
            self._pending[robot_id] = np.asarray(action, dtype=np.float64)
            self._cond.notify_all()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def reopen(self) -> None:
        with self._cond:
            self._closed = False
            self._pending.clear()

    @property
    def closed(self) -> bool:
        return self._closed

    def take(self, robot_id: int, timeout: float | None = None) -> np.ndarray:
        """Block until an action for robot_id arrives; consume and return it."""
        with self._cond:
            while robot_id not in self._pending:
                if self._closed:
                    raise SupervisorUnavailable(f"supervisor session closed (robot {robot_id})")
                if not self._cond.wait(timeout=timeout):
                    raise SupervisorUnavailable(f"timed out waiting for human action (robot {robot_id})")
            return self._pending.pop(robot_id)


class RemoteSupervisor:
    """Supervisor policy backed by a gateway mailbox.

    Each call blocks the caller's tick until the human sends an action for
    that robot; the returned action is clipped to the environment bounds.
    """

    def __init__(self, mailbox: ActionMailbox, env: EnvConfig, timeout: float | None = None):
        self.mailbox = mailbox
        self.env = env
        self.timeout = timeout

    def remote_action(self, robot_id: int, state: State) -> Action:
        action = self.mailbox.take(robot_id, timeout=self.timeout)
        return clip_action(self.env, action)
