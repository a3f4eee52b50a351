"""Training orchestration: the gated interactive loop and all baseline algorithms.

One shared episode loop routes supervisor-mode transitions into the human
dataset and autonomous ones into the robot dataset; algorithms differ only
in their gate (when control switches) and their supervisor (who acts).
Baselines: plain behavior cloning with extra demos, classifier-gated
switching with and without hysteresis, and human-gated switching driven by
a synthetic gater.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import env as envmod
from .critic import CriticConfig, RiskCritic, collect_eval_rollouts, train_critic
from .ensemble import (
    SOURCE_AUTONOMOUS,
    SOURCE_SUPERVISOR,
    Dataset,
    EnsemblePolicy,
    FitConfig,
    Transition,
    discrepancy,
    fit_bc,
    retrain_bc,
)
from .env import EnvConfig
from .gate import (
    AUTONOMOUS,
    CAUSE_EXTERNAL,
    SUPERVISOR,
    GateThresholds,
    cede_scores,
    intervene_scores,
    nearest_rank_quantile,
)
from .metrics import EpisodeStats, episode_stats
from .nets import AdamState, Mlp, mlp_new, train_step
from .supervisors import (
    OracleConfig,
    SupervisorUnavailable,
    SyntheticGater,
    SyntheticGaterConfig,
    noisy_oracle_action,
    oracle_action,
)

ALGORITHMS = ("thrifty", "bc", "safedagger", "lazydagger", "hgdagger")
ABLATIONS = ("novelty", "risk")


@dataclass(frozen=True)
class PolicyConfig:
    ensemble_size: int = 5
    hidden_sizes: tuple[int, ...] = (64, 64)
    init_train_steps: int = 2500  # 5 epochs x 500 gradient steps
    retrain_steps: int = 300
    batch_size: int = 100
    learning_rate: float = 1e-3

    def fit_config(self, steps: int) -> FitConfig:
        return FitConfig(
            ensemble_size=self.ensemble_size,
            hidden_sizes=self.hidden_sizes,
            train_steps=steps,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
        )


@dataclass(frozen=True)
class CriticTrainConfig:
    init_train_steps: int = 2000
    update_steps: int = 300
    model: CriticConfig = field(default_factory=CriticConfig)


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "thrifty"
    seed: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    num_demos: int = 30
    bc_demo_multiplier: float = 1.5
    step_budget: int = 3000
    max_episodes: int | None = None
    alpha: float = 0.01
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    critic: CriticTrainConfig = field(default_factory=CriticTrainConfig)
    init_rollouts: int = 10
    refresh_every_steps: int = 600
    refresh_rollouts: int = 10
    dr_every_episode: bool = False
    retrain_from_scratch: bool = False
    ablate: str | None = None
    classifier_train_steps: int = 500
    safedagger_tau: float = 0.008
    lazydagger_tau_h: float = 0.015
    lazydagger_tau_a_ratio: float = 0.25
    lazydagger_noise: float = 0.02
    gater: SyntheticGaterConfig = field(default_factory=SyntheticGaterConfig)
    latency: float = 10.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.ablate is not None:
            if self.algorithm != "thrifty":
                raise ValueError("ablations only apply to the thrifty algorithm")
            if self.ablate not in ABLATIONS:
                raise ValueError(f"unknown ablation {self.ablate!r}")
        if self.step_budget < 0 or self.num_demos < 0:
            raise ValueError("budgets must be nonnegative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")

    @property
    def lazydagger_tau_a(self) -> float:
        return self.lazydagger_tau_a_ratio * self.lazydagger_tau_h


@dataclass
class RunResult:
    config: RunConfig
    policy: EnsemblePolicy
    critic: RiskCritic | None
    classifier: Mlp | None
    thresholds: GateThresholds | None
    thresholds_history: list[GateThresholds]
    episode_records: list[dict]
    episode_stats: list[EpisodeStats]
    dataset_h: Dataset
    dataset_r: Dataset
    interactive_steps: int
    rollout_steps: int
    initial_policy: EnsemblePolicy | None = None  # snapshot right after offline cloning
    initial_critic: RiskCritic | None = None  # snapshot right after critic initialization


@dataclass
class EvalStats:
    episodes: int
    successes: int
    per_episode: list[EpisodeStats]

    @property
    def success_rate(self) -> float:
        return self.successes / self.episodes if self.episodes else 0.0


# ---------------------------------------------------------------------------
# Gates: who decides when control switches.


class ThriftyGate:
    """Novelty/risk entry with hysteretic discrepancy+risk exit."""

    def __init__(
        self,
        policy: EnsemblePolicy,
        critic: RiskCritic,
        thresholds: GateThresholds,
        ablate: str | None = None,
    ):
        self.policy = policy
        self.critic = critic
        self.thresholds = thresholds
        self.use_novelty = ablate != "novelty"
        self.use_risk = ablate != "risk"

    def reset_episode(self) -> None:
        pass

    def decide_entry(self, state, a_r) -> str | None:
        nov = self.policy.novelty(state)
        rk = self.critic.risk(state, a_r)
        return intervene_scores(nov, rk, self.thresholds, self.use_novelty, self.use_risk)

    def decide_exit(self, state, a_r, a_h) -> bool:
        d = discrepancy(a_r, a_h)
        rk = self.critic.risk(state, a_r)
        return cede_scores(d, rk, self.thresholds, self.use_novelty, self.use_risk)

    def scores(self, state) -> dict:
        """Live novelty/risk for telemetry streams."""
        a_r = self.policy.action(state)
        return {"novelty": self.policy.novelty(state), "risk": self.critic.risk(state, a_r)}


class ClassifierGate:
    """Memoryless discrepancy-classifier gating: supervisor acts while f flags unsafe."""

    def __init__(self, classifier: Mlp):
        self.classifier = classifier

    def reset_episode(self) -> None:
        pass

    def _unsafe(self, state) -> bool:
        return float(self.classifier.forward(state)[0]) > 0.5

    def decide_entry(self, state, a_r) -> str | None:
        return CAUSE_EXTERNAL if self._unsafe(state) else None

    def decide_exit(self, state, a_r, a_h) -> bool:
        return not self._unsafe(state)


class LazyGate(ClassifierGate):
    """Classifier entry, but exit only when the measured discrepancy is small.

    The exit compares the robot's action against the supervisor *policy*
    (clean reference), not the executed action, which may carry injected
    exploration noise.
    """

    def __init__(self, classifier: Mlp, exit_discrepancy: float, action_max: float, reference_fn=None):
        super().__init__(classifier)
        self.exit_discrepancy = exit_discrepancy  # normalized action units
        self.action_max = action_max
        self.reference_fn = reference_fn
        self.exit_checks_measured = 0  # instrumentation: exits never consult the classifier

    def decide_exit(self, state, a_r, a_h) -> bool:
        self.exit_checks_measured += 1
        reference = a_h if self.reference_fn is None else self.reference_fn(state)
        return normalized_discrepancy(a_r, reference, self.action_max) < self.exit_discrepancy


class HumanGate:
    """Supervisor-decided switching, automated by the synthetic gater.

    The gater's thresholds live in normalized action units, so actions are
    divided by ``action_scale`` before it judges them.
    """

    def __init__(self, gater: SyntheticGater, reference_fn, action_scale: float = 1.0):
        self.gater = gater
        self.reference_fn = reference_fn  # state -> the action the human would take
        self.action_scale = action_scale

    def reset_episode(self) -> None:
        self.gater.reset()

    def decide_entry(self, state, a_r) -> str | None:
        from .supervisors import ENGAGE

        decision = self.gater.decide(a_r / self.action_scale, self.reference_fn(state) / self.action_scale)
        return CAUSE_EXTERNAL if decision == ENGAGE else None

    def decide_exit(self, state, a_r, a_h) -> bool:
        from .supervisors import DISENGAGE

        return self.gater.decide(a_r / self.action_scale, np.asarray(a_h) / self.action_scale) == DISENGAGE


class NeverGate:
    """No interventions ever (pure autonomous rollouts)."""

    def reset_episode(self) -> None:
        pass

    def decide_entry(self, state, a_r) -> str | None:
        return None

    def decide_exit(self, state, a_r, a_h) -> bool:
        return True


# ---------------------------------------------------------------------------
# Shared episode machinery.


@dataclass
class GatedEpisode:
    trace: list[str]
    switch_causes: list[str]
    success: bool
    steps: int
    aborted: bool
    transitions_h: list[Transition]
    transitions_r: list[Transition]


def run_gated_episode(
    env_config: EnvConfig,
    policy: EnsemblePolicy,
    supervisor_fn,
    gate,
    rng: np.random.Generator,
    max_steps: int | None = None,
    observer=None,
) -> GatedEpisode:
    """One episode under the mode state machine.

    Per step the robot proposes an action; in autonomous mode the gate may
    hand control to the supervisor, whose action is executed and recorded
    as a label, after which the exit predicate decides the next default
    mode. The terminal step taken from inside the goal set is recorded.
    ``observer`` (if given) is called with a per-step snapshot dict.
    """
    s = envmod.reset(env_config, rng)
    mode = AUTONOMOUS
    gate.reset_episode()
    trace: list[str] = []
    causes: list[str] = []
    trans_h: list[Transition] = []
    trans_r: list[Transition] = []
    success = False
    aborted = False
    steps = 0
    last_next = s
    limit = env_config.horizon if max_steps is None else min(env_config.horizon, max_steps)
    for t in range(limit):
        flag = envmod.goal_indicator(env_config, s)
        a_r = policy.action(s)
        if mode == AUTONOMOUS:
            cause = gate.decide_entry(s, a_r)
            if cause is not None:
                mode = SUPERVISOR
                causes.append(cause)
        if mode == SUPERVISOR:
            try:
                a_h = np.asarray(supervisor_fn(s), dtype=np.float64)
            except SupervisorUnavailable:
                aborted = True
                break
            nxt, _ = envmod.step(env_config, s, a_h, rng)
            trans_h.append(Transition(s, a_h, nxt, flag, SOURCE_SUPERVISOR))
            trace.append(SUPERVISOR)
            if gate.decide_exit(s, a_r, a_h):
                mode = AUTONOMOUS
        else:
            nxt, _ = envmod.step(env_config, s, a_r, rng)
            trans_r.append(Transition(s, a_r, nxt, flag, SOURCE_AUTONOMOUS))
            trace.append(AUTONOMOUS)
        steps += 1
        last_next = nxt
        if observer is not None:
            observer({"t": t, "state": s, "mode": trace[-1], "next_state": nxt, "goal_flag": flag})
        if flag:
            success = True
            break
        s = nxt
    if not success and not aborted and steps > 0 and envmod.goal_indicator(env_config, last_next):
        success = True  # goal entered on the final transition with no budget left to record it
    return GatedEpisode(trace, causes, success, steps, aborted, trans_h, trans_r)


def collect_demos(
    env_config: EnvConfig, oracle: OracleConfig, n: int, rng: np.random.Generator
) -> Dataset:
    """n full oracle episodes; every transition is supervisor-sourced."""
    if n < 1:
        raise ValueError("need at least one demonstration episode")
    data = Dataset()
    for _ in range(n):
        steps, _ = envmod.run_episode(env_config, lambda s: oracle_action(oracle, env_config, s), rng)
        data.extend(Transition(s, a, nxt, flag, SOURCE_SUPERVISOR) for s, a, nxt, flag in steps)
    return data


# ---------------------------------------------------------------------------
# Threshold tuning against the run's datasets.


def _robot_scores(policy: EnsemblePolicy, critic: RiskCritic, dataset_r: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Risk and novelty of every state the robot policy has visited, under current nets."""
    states = dataset_r.states()
    novelty = policy.novelty_batch(states)
    actions = policy.member_actions(states).mean(axis=0)
    risk = critic.risk_batch(states, actions)
    return risk, novelty


def _supervisor_discrepancies(policy: EnsemblePolicy, dataset_h: Dataset) -> np.ndarray:
    states = dataset_h.states()
    pred = policy.member_actions(states).mean(axis=0)
    diff = pred - dataset_h.actions()
    return np.sum(diff * diff, axis=1)


def tune_from_datasets(
    policy: EnsemblePolicy,
    critic: RiskCritic,
    dataset_r: Dataset,
    dataset_h: Dataset,
    alpha: float,
) -> GateThresholds:
    """Initial threshold fit: quantiles on robot-visited states, mean discrepancy on human ones."""
    if len(dataset_r) == 0:
        raise ValueError("robot dataset is empty; collect rollouts before tuning")
    risk, novelty = _robot_scores(policy, critic, dataset_r)
    disc = _supervisor_discrepancies(policy, dataset_h)
    return GateThresholds(
        risk_intervene=nearest_rank_quantile(risk, 1.0 - alpha),
        risk_cede=nearest_rank_quantile(risk, 0.5),
        novelty_intervene=nearest_rank_quantile(novelty, 1.0 - alpha),
        discrepancy_cede=float(disc.mean()),
        budget=alpha,
    )


def retune_thresholds(
    policy: EnsemblePolicy,
    critic: RiskCritic,
    dataset_r: Dataset,
    previous: GateThresholds,
) -> GateThresholds:
    """Episode-end refresh of the quantile thresholds; the cede discrepancy bar stays fixed."""
    risk, novelty = _robot_scores(policy, critic, dataset_r)
    return GateThresholds(
        risk_intervene=nearest_rank_quantile(risk, 1.0 - previous.budget),
        risk_cede=nearest_rank_quantile(risk, 0.5),
        novelty_intervene=nearest_rank_quantile(novelty, 1.0 - previous.budget),
        discrepancy_cede=previous.discrepancy_cede,
        budget=previous.budget,
    )


# ---------------------------------------------------------------------------
# Discrepancy classifier shared by the classifier-gated baselines.
#
# The fixed thresholds these baselines ship with (0.008, 0.015) assume
# actions on a normalized [-1, 1] scale, so their discrepancies are
# computed on actions divided by action_max. The budget-tuned gate keeps
# raw discrepancies since its bar is fit from data.


def normalized_discrepancy(a_r: np.ndarray, a_h: np.ndarray, action_max: float) -> float:
    return discrepancy(a_r, a_h) / (action_max**2)


def classifier_labels(
    policy: EnsemblePolicy, dataset_h: Dataset, tau: float, reference_fn=None
) -> tuple[np.ndarray, np.ndarray]:
    """States and binary unsafe labels: 1 where the robot strays beyond tau.

    ``reference_fn`` supplies the supervisor policy's clean action when the
    stored dataset actions carry injected exploration noise; the noise would
    otherwise dominate the discrepancy and mark every state unsafe.
    """
    states = dataset_h.states()
    if reference_fn is None:
        reference = dataset_h.actions()
    else:
        reference = np.stack([reference_fn(s) for s in states])
    pred = policy.member_actions(states).mean(axis=0)
    d = np.sum((pred - reference) ** 2, axis=1) / (policy.action_max**2)
    return states, (d > tau).astype(np.float64)


def train_classifier(
    classifier: Mlp,
    states: np.ndarray,
    labels: np.ndarray,
    steps: int,
    rng: np.random.Generator,
    batch_size: int = 100,
    learning_rate: float = 1e-3,
) -> None:
    """MSE-fit the sigmoid classifier on class-balanced minibatches.

    Early in training one class can dominate the labels almost entirely;
    uniform sampling would then collapse the classifier to a constant and
    the gates it backs would never (or always) fire.
    """
    adam = AdamState.for_mlp(classifier)
    n = states.shape[0]
    batch = min(batch_size, n)
    targets = labels[:, None]
    pos = np.flatnonzero(labels == 1.0)
    neg = np.flatnonzero(labels == 0.0)
    balanced = pos.size > 0 and neg.size > 0
    for _ in range(steps):
        if balanced:
            half = batch // 2
            idx = np.concatenate(
                [pos[rng.integers(0, pos.size, size=half)], neg[rng.integers(0, neg.size, size=batch - half)]]
            )
        else:
            idx = rng.integers(0, n, size=batch)
        train_step(classifier, states[idx], targets[idx], adam, learning_rate)


# ---------------------------------------------------------------------------
# Seed plumbing: one named child generator per consumer.


def _rngs(seed: int) -> dict[str, np.random.Generator]:
    root = np.random.SeedSequence(seed)
    names = ["demos", "policy", "critic", "episodes", "rollouts", "classifier", "eval"]
    children = root.spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


# ---------------------------------------------------------------------------
# Algorithm runners.


def _episode_record(
    index: int,
    episode: GatedEpisode,
    stats: EpisodeStats,
    steps_used: int,
    dataset_h: Dataset,
    dataset_r: Dataset,
    thresholds: GateThresholds | None,
) -> dict:
    record = {
        "episode": index,
        "steps": episode.steps,
        "success": episode.success,
        "aborted": episode.aborted,
        "ints": stats.ints,
        "acts_h": stats.acts_h,
        "acts_r": stats.acts_r,
        "switch_causes": {
            cause: stats.switch_causes.count(cause) for cause in ("novelty", "risk", "external")
        },
        "steps_used": steps_used,
        "dh_size": len(dataset_h),
        "dr_size": len(dataset_r),
    }
    if thresholds is not None:
        record["thresholds"] = thresholds.as_dict()
    return record


def _interactive_loop(
    config: RunConfig,
    policy: EnsemblePolicy,
    dataset_h: Dataset,
    dataset_r: Dataset,
    rngs: dict,
    make_gate,
    supervisor_fn,
    after_episode,
    thresholds_for_record,
) -> tuple[list[dict], list[EpisodeStats], int, bool]:
    """Run gated episodes until the interactive step budget or episode cap is hit."""
    records: list[dict] = []
    stats_list: list[EpisodeStats] = []
    steps_used = 0
    index = 0
    supervisor_lost = False
    while steps_used < config.step_budget:
        if config.max_episodes is not None and index >= config.max_episodes:
            break
        episode = run_gated_episode(
            config.env,
            policy,
            supervisor_fn,
            make_gate(),
            rngs["episodes"],
            max_steps=config.step_budget - steps_used,
        )
        steps_used += episode.steps
        if not episode.aborted:
            dataset_h.extend(episode.transitions_h)
            dataset_r.extend(episode.transitions_r)
        if episode.trace:
            stats = episode_stats(episode.trace, episode.success, episode.switch_causes)
        else:
            stats = EpisodeStats(0, 0, 0, False, [])
        stats_list.append(stats)
        records.append(
            _episode_record(index, episode, stats, steps_used, dataset_h, dataset_r, thresholds_for_record())
        )
        index += 1
        if episode.aborted:
            supervisor_lost = True
            break
        after_episode()
    return records, stats_list, steps_used, supervisor_lost


def run_thrifty(config: RunConfig, supervisor_fn=None) -> RunResult:
    """Full budget-gated interactive run: BC init, critic init, tuned gating, per-episode updates."""
    rngs = _rngs(config.seed)
    env_cfg = config.env
    dataset_h = collect_demos(env_cfg, config.oracle, config.num_demos, rngs["demos"])
    policy = fit_bc(dataset_h, config.policy.fit_config(config.policy.init_train_steps), rngs["policy"], env_cfg.action_max)
    initial_policy = policy.clone()

    dataset_r = Dataset()
    rollout_steps = 0
    for transitions, _ in collect_eval_rollouts(policy, env_cfg, config.init_rollouts, rngs["rollouts"]):
        dataset_r.extend(transitions)
        rollout_steps += len(transitions)

    critic = RiskCritic(
        policy.input_dim, policy.action_dim, config.critic.model, seed=config.seed, action_scale=env_cfg.action_max
    )
    train_critic(critic, dataset_h.merged(dataset_r), policy, config.critic.init_train_steps, rngs["critic"])
    initial_critic = critic.clone()

    thresholds = tune_from_datasets(policy, critic, dataset_r, dataset_h, config.alpha)
    history = [thresholds]

    if supervisor_fn is None:
        supervisor_fn = lambda s: oracle_action(config.oracle, env_cfg, s)

    state = {"thresholds": thresholds, "since_refresh": 0, "rollout_steps": rollout_steps}

    def make_gate():
        return ThriftyGate(policy, critic, state["thresholds"], config.ablate)

    def after_episode():
        state["thresholds"] = retune_thresholds(policy, critic, dataset_r, state["thresholds"])
        history.append(state["thresholds"])
        retrain_bc(policy, dataset_h, config.policy.fit_config(config.policy.retrain_steps), rngs["policy"], config.retrain_from_scratch)
        if config.dr_every_episode or state["since_refresh"] >= config.refresh_every_steps:
            for transitions, _ in collect_eval_rollouts(policy, env_cfg, config.refresh_rollouts, rngs["rollouts"]):
                dataset_r.extend(transitions)
                state["rollout_steps"] += len(transitions)
            state["since_refresh"] = 0
        train_critic(critic, dataset_h.merged(dataset_r), policy, config.critic.update_steps, rngs["critic"])

    records: list[dict] = []
    stats_list: list[EpisodeStats] = []
    steps_used = 0
    index = 0
    while steps_used < config.step_budget:
        if config.max_episodes is not None and index >= config.max_episodes:
            break
        episode = run_gated_episode(
            env_cfg, policy, supervisor_fn, make_gate(), rngs["episodes"], max_steps=config.step_budget - steps_used
        )
        steps_used += episode.steps
        state["since_refresh"] += episode.steps
        if not episode.aborted:
            dataset_h.extend(episode.transitions_h)
            dataset_r.extend(episode.transitions_r)
        stats = (
            episode_stats(episode.trace, episode.success, episode.switch_causes)
            if episode.trace
            else EpisodeStats(0, 0, 0, False, [])
        )
        stats_list.append(stats)
        records.append(
            _episode_record(index, episode, stats, steps_used, dataset_h, dataset_r, state["thresholds"])
        )
        index += 1
        if episode.aborted:
            break
        after_episode()

    return RunResult(
        config=config,
        policy=policy,
        critic=critic,
        classifier=None,
        thresholds=state["thresholds"],
        thresholds_history=history,
        episode_records=records,
        episode_stats=stats_list,
        dataset_h=dataset_h,
        dataset_r=dataset_r,
        interactive_steps=steps_used,
        rollout_steps=state["rollout_steps"],
        initial_policy=initial_policy,
        initial_critic=initial_critic,
    )


def run_bc(config: RunConfig) -> RunResult:
    """Behavior cloning on extra offline demos; no interventions, nothing interactive."""
    rngs = _rngs(config.seed)
    n = max(1, math.ceil(config.num_demos * config.bc_demo_multiplier))
    dataset_h = collect_demos(config.env, config.oracle, n, rngs["demos"])
    policy = fit_bc(
        dataset_h, config.policy.fit_config(config.policy.init_train_steps), rngs["policy"], config.env.action_max
    )
    return RunResult(
        config=config,
        policy=policy,
        critic=None,
        classifier=None,
        thresholds=None,
        thresholds_history=[],
        episode_records=[],
        episode_stats=[],
        dataset_h=dataset_h,
        dataset_r=Dataset(),
        interactive_steps=0,
        rollout_steps=0,
    )


def _run_classifier_gated(
    config: RunConfig, tau: float, make_gate_from_classifier, supervisor_fn, label_reference_fn=None
) -> RunResult:
    """Shared loop for the classifier-gated baselines."""
    rngs = _rngs(config.seed)
    env_cfg = config.env
    dataset_h = collect_demos(env_cfg, config.oracle, config.num_demos, rngs["demos"])
    policy = fit_bc(dataset_h, config.policy.fit_config(config.policy.init_train_steps), rngs["policy"], env_cfg.action_max)
    dataset_r = Dataset()

    classifier = mlp_new(
        [policy.input_dim, *config.policy.hidden_sizes, 1],
        hidden_activation="relu",
        output_activation="sigmoid",
        seed=config.seed + 1,
    )
    states, labels = classifier_labels(policy, dataset_h, tau, label_reference_fn)
    train_classifier(classifier, states, labels, config.classifier_train_steps, rngs["classifier"])

    def after_episode():
        retrain_bc(policy, dataset_h, config.policy.fit_config(config.policy.retrain_steps), rngs["policy"], config.retrain_from_scratch)
        s, y = classifier_labels(policy, dataset_h, tau, label_reference_fn)
        train_classifier(classifier, s, y, config.classifier_train_steps, rngs["classifier"])

    records, stats_list, steps_used, _ = _interactive_loop(
        config,
        policy,
        dataset_h,
        dataset_r,
        rngs,
        make_gate=lambda: make_gate_from_classifier(classifier),
        supervisor_fn=supervisor_fn,
        after_episode=after_episode,
        thresholds_for_record=lambda: None,
    )
    return RunResult(
        config=config,
        policy=policy,
        critic=None,
        classifier=classifier,
        thresholds=None,
        thresholds_history=[],
        episode_records=records,
        episode_stats=stats_list,
        dataset_h=dataset_h,
        dataset_r=dataset_r,
        interactive_steps=steps_used,
        rollout_steps=0,
    )


def run_safedagger(config: RunConfig, supervisor_fn=None) -> RunResult:
    """Classifier-gated switching without hysteresis: supervisor acts while states look unsafe."""
    if supervisor_fn is None:
        supervisor_fn = lambda s: oracle_action(config.oracle, config.env, s)
    return _run_classifier_gated(
        config, config.safedagger_tau, lambda f: ClassifierGate(f), supervisor_fn
    )


def run_lazydagger(config: RunConfig, supervisor_fn=None) -> RunResult:
    """Classifier entry with measured-discrepancy exit and noised supervisor actions."""
    noisy_cfg = OracleConfig(
        waypoint=config.oracle.waypoint,
        gap_exit=config.oracle.gap_exit,
        gain=config.oracle.gain,
        noise_std=config.lazydagger_noise,
    )
    rng_noise = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(8)[-1])
    if supervisor_fn is None:
        supervisor_fn = lambda s: noisy_oracle_action(noisy_cfg, config.env, s, rng_noise)
    clean_fn = lambda s: oracle_action(config.oracle, config.env, s)
    return _run_classifier_gated(
        config,
        config.lazydagger_tau_h,
        lambda f: LazyGate(f, config.lazydagger_tau_a, config.env.action_max, clean_fn),
        supervisor_fn,
        label_reference_fn=clean_fn,
    )


def run_hgdagger(config: RunConfig, supervisor_fn=None, gate=None) -> RunResult:
    """Human-gated baseline: the supervisor (synthetic gater by default) times interventions."""
    rngs = _rngs(config.seed)
    env_cfg = config.env
    dataset_h = collect_demos(env_cfg, config.oracle, config.num_demos, rngs["demos"])
    policy = fit_bc(dataset_h, config.policy.fit_config(config.policy.init_train_steps), rngs["policy"], env_cfg.action_max)
    dataset_r = Dataset()

    if supervisor_fn is None:
        supervisor_fn = lambda s: oracle_action(config.oracle, env_cfg, s)
    if gate is None:
        gate = HumanGate(SyntheticGater(config.gater), supervisor_fn, action_scale=env_cfg.action_max)

    def after_episode():
        retrain_bc(policy, dataset_h, config.policy.fit_config(config.policy.retrain_steps), rngs["policy"], config.retrain_from_scratch)

    records, stats_list, steps_used, _ = _interactive_loop(
        config,
        policy,
        dataset_h,
        dataset_r,
        rngs,
        make_gate=lambda: gate,
        supervisor_fn=supervisor_fn,
        after_episode=after_episode,
        thresholds_for_record=lambda: None,
    )
    return RunResult(
        config=config,
        policy=policy,
        critic=None,
        classifier=None,
        thresholds=None,
        thresholds_history=[],
        episode_records=records,
        episode_stats=stats_list,
        dataset_h=dataset_h,
        dataset_r=dataset_r,
        interactive_steps=steps_used,
        rollout_steps=0,
    )


def run_algorithm(config: RunConfig, supervisor_fn=None) -> RunResult:
    if config.algorithm == "thrifty":
        return run_thrifty(config, supervisor_fn)
    if config.algorithm == "bc":
        return run_bc(config)
    if config.algorithm == "safedagger":
        return run_safedagger(config, supervisor_fn)
    if config.algorithm == "lazydagger":
        return run_lazydagger(config, supervisor_fn)
    if config.algorithm == "hgdagger":
        return run_hgdagger(config, supervisor_fn)
    raise ValueError(f"unknown algorithm {config.algorithm!r}")


def evaluate(
    policy: EnsemblePolicy,
    env_config: EnvConfig,
    n: int,
    rng: np.random.Generator,
    supervisor_fn=None,
    gate=None,
) -> EvalStats:
    """Success rate over n episodes; gated when a supervisor and gate are supplied.

    No training updates or dataset writes happen here.
    """
    if n < 1:
        raise ValueError("need at least one evaluation episode")
    stats: list[EpisodeStats] = []
    successes = 0
    if supervisor_fn is None or gate is None:
        for _ in range(n):
            steps, success = envmod.run_episode(env_config, policy.action, rng)
            trace = [AUTONOMOUS] * len(steps)
            stats.append(episode_stats(trace, success) if trace else EpisodeStats(0, 0, 0, success, []))
            successes += int(success)
    else:
        for _ in range(n):
            episode = run_gated_episode(env_config, policy, supervisor_fn, gate, rng)
            stats.append(
                episode_stats(episode.trace, episode.success, episode.switch_causes)
                if episode.trace
                else EpisodeStats(0, 0, 0, episode.success, [])
            )
            successes += int(episode.success)
    return EvalStats(episodes=n, successes=successes, per_episode=stats)
