"""Task-success critic: discounted goal-reaching probability and its risk score.

A sigmoid-headed MLP over (state, action) is regressed onto bootstrapped
targets: 1 on goal-flagged transitions, otherwise gamma times the frozen
critic's value at the next state under the current robot policy. Risk is
one minus the critic value. Minibatches are goal-balanced so the rare
success anchors keep their weight.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import env as envmod
from .ensemble import SOURCE_AUTONOMOUS, Dataset, EnsemblePolicy, Transition
from .nets import AdamState, Mlp, adam_step, mlp_new, mse, mse_grad

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CriticConfig:
    hidden_sizes: tuple[int, ...] = (64, 64)
    gamma: float = 0.9999
    batch_size: int = 50
    goal_fraction: float = 0.10
    learning_rate: float = 1e-3
    target_refresh: int = 100
    # success probability reported where there is no evidence. The head is
    # initialized here, and each batch carries a few uniform-random
    # (state, action) pairs regressed toward it: bootstrapped targets leave
    # the value of never-visited regions undetermined, and without this
    # prior smooth extrapolation from nearby success anchors silently marks
    # them safe.
    init_q: float = 0.1
    pessimism_fraction: float = 0.2

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if not 0 <= self.goal_fraction <= 1:
            raise ValueError("goal_fraction must be in [0, 1]")
        if not 0 < self.init_q < 1:
            raise ValueError("init_q must be in (0, 1)")
        if not 0 <= self.pessimism_fraction <= 1:
            raise ValueError("pessimism_fraction must be in [0, 1]")


class RiskCritic:
    """Q over concatenated (state, action) with a frozen bootstrap target copy.

    Action components are divided by ``action_scale`` at the input so they
    carry comparable weight to the unit-square state coordinates; a raw
    +-0.05 action would be nearly invisible to the network, and the whole
    point of conditioning on the action is telling apart a step that wedges
    into the wall from one that threads the gap at the same state.
    """

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        config: CriticConfig,
        seed: int = 0,
        action_scale: float = 1.0,
    ):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.config = config
        self.action_scale = action_scale
        self.q_net: Mlp = mlp_new(
            [state_dim + action_dim, *config.hidden_sizes, 1],
            hidden_activation="relu",
            output_activation="sigmoid",
            seed=seed,
        )
        self.q_net.biases[-1][:] = math.log(config.init_q / (1.0 - config.init_q))
        self.target_net: Mlp = self.q_net.clone()
        self.adam = AdamState.for_mlp(self.q_net)
        self.steps_trained = 0
        self._warned_no_goals = False

    def sync_target(self) -> None:
        self.target_net = self.q_net.clone()

    def clone(self) -> "RiskCritic":
        copy = RiskCritic(self.state_dim, self.action_dim, self.config, action_scale=self.action_scale)
        copy.q_net = self.q_net.clone()
        copy.target_net = self.target_net.clone()
        copy.adam = self.adam.clone()
        copy.steps_trained = self.steps_trained
        return copy

    def _inputs(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [np.atleast_2d(states), np.atleast_2d(actions) / self.action_scale], axis=1
        )

    def q_value(self, state: np.ndarray, action: np.ndarray) -> float:
        if state.shape[-1] != self.state_dim or action.shape[-1] != self.action_dim:
            raise ValueError("state/action dims do not match the critic")
        return float(self.q_net.forward(self._inputs(state, action))[0, 0])

    def q_batch(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return self.q_net.forward(self._inputs(states, actions))[:, 0]

    def risk(self, state: np.ndarray, action: np.ndarray) -> float:
        return 1.0 - self.q_value(state, action)

    def risk_batch(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return 1.0 - self.q_batch(states, actions)

    def _target_q_batch(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return self.target_net.forward(self._inputs(states, actions))[:, 0]


def td_target(critic: RiskCritic, policy: EnsemblePolicy, transition: Transition) -> float:
    """Bootstrapped regression target for one transition.

    Goal-flagged transitions pin the target to exactly 1; otherwise the
    frozen target copy is evaluated at the next state under the current
    ensemble-mean action (no gradient flows through the target).
    """
    if transition.goal_flag:
        return 1.0
    next_action = policy.action(transition.next_state)
    q_next = float(critic._target_q_batch(transition.next_state[None, :], next_action[None, :])[0])
    return critic.config.gamma * q_next


def _td_targets_batch(
    critic: RiskCritic, policy: EnsemblePolicy, next_states: np.ndarray, flags: np.ndarray
) -> np.ndarray:
    next_actions = policy.member_actions(next_states).mean(axis=0)
    q_next = critic._target_q_batch(next_states, next_actions)
    return flags + (1.0 - flags) * critic.config.gamma * q_next


def _balanced_batch(
    goal_idx: np.ndarray, other_idx: np.ndarray, batch_size: int, goal_fraction: float, rng: np.random.Generator
) -> np.ndarray:
    n_goal = min(math.ceil(goal_fraction * batch_size), batch_size)
    picks_goal = goal_idx[rng.integers(0, goal_idx.size, size=n_goal)]
    picks_other = other_idx[rng.integers(0, other_idx.size, size=batch_size - n_goal)]
    return np.concatenate([picks_goal, picks_other])


def train_critic(
    critic: RiskCritic,
    dataset: Dataset,
    policy: EnsemblePolicy,
    steps: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run goal-balanced TD regression steps; returns the per-step loss history.

    Alongside the bootstrapped targets, a slice of every batch regresses
    uniform-random (state, action) pairs toward the no-evidence value
    ``init_q`` so that unvisited regions score risky rather than borrowing
    optimism from their neighbors.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train the critic on an empty dataset")
    states = dataset.states()
    actions = dataset.actions()
    next_states = dataset.next_states()
    flags = dataset.goal_flags().astype(np.float64)
    goal_idx = np.flatnonzero(flags == 1.0)
    other_idx = np.flatnonzero(flags == 0.0)
    if goal_idx.size == 0 and not critic._warned_no_goals:
        log.warning("no goal-flagged transitions; goal balancing disabled, sampling uniformly")
        critic._warned_no_goals = True
    if other_idx.size == 0:
        other_idx = goal_idx  # degenerate all-goal dataset

    # prior pairs are drawn over the observed state box and the action box
    state_lo, state_hi = states.min(axis=0), states.max(axis=0)
    batch_size = min(critic.config.batch_size, max(len(dataset), 1))
    n_prior = math.ceil(critic.config.pessimism_fraction * batch_size)
    losses = np.empty(steps)
    for i in range(steps):
        if goal_idx.size > 0:
            idx = _balanced_batch(goal_idx, other_idx, batch_size, critic.config.goal_fraction, rng)
        else:
            idx = rng.integers(0, len(dataset), size=batch_size)
        targets = _td_targets_batch(critic, policy, next_states[idx], flags[idx])[:, None]
        inputs = critic._inputs(states[idx], actions[idx])
        if n_prior > 0:
            prior_states = rng.uniform(state_lo, state_hi, size=(n_prior, critic.state_dim))
            prior_actions = rng.uniform(
                -critic.action_scale, critic.action_scale, size=(n_prior, critic.action_dim)
            )
            inputs = np.vstack([inputs, critic._inputs(prior_states, prior_actions)])
            targets = np.vstack([targets, np.full((n_prior, 1), critic.config.init_q)])
        pred = critic.q_net.forward(inputs)
        losses[i] = mse(pred, targets)
        grads = critic.q_net.backward(inputs, mse_grad(pred, targets))
        adam_step(critic.q_net, grads, critic.adam, critic.config.learning_rate)
        critic.steps_trained += 1
        if critic.steps_trained % critic.config.target_refresh == 0:
            critic.sync_target()
    return losses


def collect_eval_rollouts(
    policy: EnsemblePolicy,
    env_config: envmod.EnvConfig,
    k: int,
    rng: np.random.Generator,
) -> list[tuple[list[Transition], bool]]:
    """k autonomous episodes under the ensemble mean; no supervisor involvement."""
    rollouts = []
    for _ in range(k):
        steps, success = envmod.run_episode(env_config, policy.action, rng)
        transitions = [
            Transition(s, a, nxt, flag, SOURCE_AUTONOMOUS) for s, a, nxt, flag in steps
        ]
        rollouts.append((transitions, success))
    return rollouts
