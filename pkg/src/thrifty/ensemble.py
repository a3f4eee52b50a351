"""Bootstrapped behavior-cloning ensemble: executed action, novelty, discrepancy.

The robot policy is K tanh-headed MLPs trained on independent
with-replacement resamples of the supervisor dataset. The executed action
is the ensemble mean; the spread of member outputs at a state is the
novelty score used for intervention gating.

Each member carries a frozen randomly-initialized prior network added to
its pre-tanh logits. Training cancels the prior wherever data exists, but
far from the data the priors diverge across members, so ensemble
disagreement persists off-distribution instead of collapsing once the
members converge (in low dimensions plain bootstrapped MLPs end up
agreeing even where they have never seen data).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import AdamState, Mlp, adam_step, mlp_new, mse_grad

SOURCE_SUPERVISOR = "supervisor"
SOURCE_AUTONOMOUS = "autonomous"


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    goal_flag: int
    source_mode: str


class Dataset:
    """Ordered list of transitions with matrix views for training."""

    def __init__(self, transitions: list[Transition] | None = None):
        self.transitions: list[Transition] = list(transitions) if transitions else []

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)

    def append(self, t: Transition) -> None:
        self.transitions.append(t)

    def extend(self, ts) -> None:
        self.transitions.extend(ts)

    def states(self) -> np.ndarray:
        return np.array([t.state for t in self.transitions])

    def actions(self) -> np.ndarray:
        return np.array([t.action for t in self.transitions])

    def next_states(self) -> np.ndarray:
        return np.array([t.next_state for t in self.transitions])

    def goal_flags(self) -> np.ndarray:
        return np.array([t.goal_flag for t in self.transitions], dtype=np.int64)

    def from_source(self, source_mode: str) -> "Dataset":
        return Dataset([t for t in self.transitions if t.source_mode == source_mode])

    def merged(self, other: "Dataset") -> "Dataset":
        return Dataset(self.transitions + other.transitions)


@dataclass(frozen=True)
class FitConfig:
    ensemble_size: int = 5
    hidden_sizes: tuple[int, ...] = (64, 64)
    train_steps: int = 2000
    batch_size: int = 100
    learning_rate: float = 1e-3
    # clipped expert actions sit exactly on the action bound; training the
    # tanh head toward a point strictly inside its range keeps weights
    # moderate instead of pushing the head into saturation
    label_margin: float = 0.8
    prior_scale: float = 2.0


class EnsemblePolicy:
    """K bootstrapped MLPs over states; actions bounded by a rescaled tanh head.

    Members and their frozen priors output raw logits; a member's action is
    ``output_scale * tanh(member(x) + prior_scale * prior(x))``. Training
    targets sit at ``label_margin`` inside the tanh range and the output
    scale compensates (``output_scale = action_max / label_margin``), so a
    converged member reproduces clipped expert actions without bias while
    the head stays out of saturation. Proposed actions may nominally exceed
    the action bound by that margin; the environment clips on execution.
    """

    def __init__(
        self,
        members: list[Mlp],
        action_max: float,
        priors: list[Mlp] | None = None,
        prior_scale: float = 1.0,
        output_scale: float | None = None,
    ):
        if not members:
            raise ValueError("ensemble needs at least one member")
        dims = {(m.input_dim, m.output_dim) for m in members}
        if len(dims) != 1:
            raise ValueError("ensemble members must share architecture")
        if priors is not None and len(priors) != len(members):
            raise ValueError("need one prior per member")
        self.members = members
        self.priors = priors
        self.prior_scale = prior_scale
        self.action_max = action_max
        self.output_scale = action_max if output_scale is None else output_scale

    @property
    def input_dim(self) -> int:
        return self.members[0].input_dim

    @property
    def action_dim(self) -> int:
        return self.members[0].output_dim

    def _logits(self, k: int, state: np.ndarray) -> np.ndarray:
        z = self.members[k].forward(state)
        if self.priors is not None:
            z = z + self.prior_scale * self.priors[k].forward(state)
        return z

    def member_actions(self, state: np.ndarray) -> np.ndarray:
        """Stack of member actions: (K, action_dim) for a single state, (K, n, d) for a batch."""
        return np.stack(
            [self.output_scale * np.tanh(self._logits(k, state)) for k in range(len(self.members))]
        )

    def action(self, state: np.ndarray) -> np.ndarray:
        """Executed action: componentwise mean of member outputs."""
        return self.member_actions(state).mean(axis=0)

    def novelty(self, state: np.ndarray) -> float:
        """Population variance of each action component across members, averaged over components."""
        if len(self.members) < 2:
            return 0.0
        return float(component_variance_mean(self.member_actions(state)))

    def novelty_batch(self, states: np.ndarray) -> np.ndarray:
        if len(self.members) < 2:
            return np.zeros(states.shape[0])
        outs = self.member_actions(states)  # (K, n, d)
        return outs.var(axis=0).mean(axis=1)

    def clone(self) -> "EnsemblePolicy":
        return EnsemblePolicy(
            [m.clone() for m in self.members],
            self.action_max,
            [p.clone() for p in self.priors] if self.priors is not None else None,
            self.prior_scale,
            self.output_scale,
        )


def component_variance_mean(member_outputs: np.ndarray) -> float:
    """Mean over components of the population (divide-by-K) variance across members."""
    outs = np.asarray(member_outputs, dtype=np.float64)
    return float(outs.var(axis=0).mean())


def discrepancy(a_r: np.ndarray, a_h: np.ndarray) -> float:
    """Squared Euclidean distance between two actions."""
    a_r = np.asarray(a_r, dtype=np.float64)
    a_h = np.asarray(a_h, dtype=np.float64)
    if a_r.shape != a_h.shape:
        raise ValueError(f"action shape mismatch {a_r.shape} vs {a_h.shape}")
    diff = a_r - a_h
    return float(diff @ diff)


def _train_member(
    member: Mlp,
    prior_logits_fn,
    states: np.ndarray,
    labels: np.ndarray,
    config: FitConfig,
    rng: np.random.Generator,
) -> None:
    """Train one member on a fresh bootstrap resample of the labelled data.

    The tanh head is applied over member-plus-prior logits, so the gradient
    is routed through tanh by hand; the frozen prior's contribution on the
    resample is precomputed once.
    """
    n = states.shape[0]
    boot = rng.integers(0, n, size=n)
    xs, ys = states[boot], labels[boot]
    prior_logits = prior_logits_fn(xs)
    adam = AdamState.for_mlp(member)
    batch = min(config.batch_size, n)
    for _ in range(config.train_steps):
        idx = rng.integers(0, n, size=batch)
        z = member.forward(xs[idx]) + prior_logits[idx]
        y = np.tanh(z)
        g_z = mse_grad(y, ys[idx]) * (1.0 - y * y)
        grads = member.backward(xs[idx], g_z)
        adam_step(member, grads, adam, config.learning_rate)


def _prior_logits_fn(policy: EnsemblePolicy, k: int):
    if policy.priors is None:
        return lambda xs: np.zeros((xs.shape[0], policy.action_dim))
    prior = policy.priors[k]
    scale = policy.prior_scale
    return lambda xs: scale * prior.forward(xs)


def fit_bc(dataset: Dataset, config: FitConfig, rng: np.random.Generator, action_max: float) -> EnsemblePolicy:
    """Behavior-clone a fresh ensemble on the supervisor-sourced transitions."""
    sup = dataset.from_source(SOURCE_SUPERVISOR)
    if len(sup) == 0:
        raise ValueError("cannot fit behavior cloning on an empty supervisor dataset")
    states = sup.states()
    labels = config.label_margin * sup.actions() / action_max
    input_dim = states.shape[1]
    action_dim = labels.shape[1]
    layout = [input_dim, *config.hidden_sizes, action_dim]
    seeds = rng.integers(0, 2**31 - 1, size=2 * config.ensemble_size)
    members = [mlp_new(layout, output_activation="identity", seed=int(seeds[2 * k])) for k in range(config.ensemble_size)]
    priors = None
    if config.prior_scale > 0:
        priors = [
            mlp_new(layout, output_activation="identity", seed=int(seeds[2 * k + 1]))
            for k in range(config.ensemble_size)
        ]
    policy = EnsemblePolicy(members, action_max, priors, config.prior_scale, action_max / config.label_margin)
    for k, member in enumerate(members):
        _train_member(member, _prior_logits_fn(policy, k), states, labels, config, rng)
    return policy


def retrain_bc(
    policy: EnsemblePolicy,
    dataset: Dataset,
    config: FitConfig,
    rng: np.random.Generator,
    from_scratch: bool = False,
) -> EnsemblePolicy:
    """Update the ensemble on the grown supervisor dataset.

    Warm-starts from current member parameters by default; ``from_scratch``
    re-initializes every member before training.
    """
    if from_scratch:
        return fit_bc(dataset, config, rng, policy.action_max)
    sup = dataset.from_source(SOURCE_SUPERVISOR)
    if len(sup) == 0:
        raise ValueError("cannot retrain on an empty supervisor dataset")
    states = sup.states()
    labels = sup.actions() / policy.output_scale  # same margin the policy was built with
    for k, member in enumerate(policy.members):
        _train_member(member, _prior_logits_fn(policy, k), states, labels, config, rng)
    return policy
