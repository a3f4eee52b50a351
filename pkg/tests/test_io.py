import json

import numpy as np
import pytest

from thrifty.critic import CriticConfig, RiskCritic
from thrifty.engine import PolicyConfig, RunConfig
from thrifty.ensemble import Dataset, EnsemblePolicy, FitConfig, Transition, fit_bc
from thrifty.env import EnvConfig
from thrifty.io import (
    CheckpointError,
    KIND_CLASSIFIER,
    KIND_CRITIC,
    KIND_POLICY,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_checkpoint,
    load_config,
    load_dataset,
    load_thresholds,
    save_checkpoint,
    save_config,
    save_dataset,
    save_thresholds,
)
from thrifty.gate import GateThresholds
from thrifty.nets import mlp_new


def _random_dataset(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(
        [
            Transition(
                rng.uniform(size=2),
                rng.uniform(-0.05, 0.05, 2),
                rng.uniform(size=2),
                int(rng.integers(0, 2)),
                "supervisor" if rng.integers(0, 2) else "autonomous",
            )
            for _ in range(n)
        ]
    )


def test_dataset_round_trip(tmp_path):
    data = _random_dataset(1000)
    path = tmp_path / "d.jsonl"
    save_dataset(path, data)
    loaded = load_dataset(path)
    assert len(loaded) == len(data)
    for a, b in zip(data, loaded):
        assert np.array_equal(a.state, b.state)
        assert np.array_equal(a.action, b.action)
        assert np.array_equal(a.next_state, b.next_state)
        assert a.goal_flag == b.goal_flag and a.source_mode == b.source_mode


def test_dataset_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert len(load_dataset(path)) == 0


def test_dataset_corrupt_line_cites_line_number(tmp_path):
    data = _random_dataset(10)
    path = tmp_path / "bad.jsonl"
    save_dataset(path, data)
    lines = path.read_text().splitlines()
    lines[6] = '{"state": [0.1, 0.2], "action": broken'
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="line 7"):
        load_dataset(path)


def test_dataset_dim_validation(tmp_path):
    path = tmp_path / "dims.jsonl"
    path.write_text(
        json.dumps(
            {"state": [0.1, 0.2, 0.3], "action": [0, 0], "next_state": [0.1, 0.2, 0.3], "goal_flag": 0, "source_mode": "supervisor"}
        )
        + "\n"
    )
    with pytest.raises(ValueError, match="line 1"):
        load_dataset(path, expected_dim=2)


def _trained_policy():
    data = Dataset(
        [
            Transition(np.array([0.1 * i, 0.05 * i]), np.array([0.01, -0.01]), np.zeros(2), 0, "supervisor")
            for i in range(10)
        ]
    )
    return fit_bc(data, FitConfig(ensemble_size=2, hidden_sizes=(8,), train_steps=40), np.random.default_rng(0), 0.05)


def test_policy_checkpoint_round_trip_bit_exact(tmp_path):
    policy = _trained_policy()
    path = tmp_path / "p.json"
    save_checkpoint(path, policy, {"seed": 0})
    loaded = load_checkpoint(path, KIND_POLICY)
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.uniform(size=2)
        assert np.array_equal(policy.action(x), loaded.action(x))
        assert policy.novelty(x) == loaded.novelty(x)


def test_critic_checkpoint_round_trip(tmp_path):
    critic = RiskCritic(2, 2, CriticConfig(), seed=4)
    path = tmp_path / "c.json"
    save_checkpoint(path, critic, {})
    loaded = load_checkpoint(path, KIND_CRITIC)
    rng = np.random.default_rng(2)
    for _ in range(10):
        s, a = rng.uniform(size=2), rng.uniform(-0.05, 0.05, 2)
        assert critic.q_value(s, a) == loaded.q_value(s, a)
    assert loaded.config.gamma == critic.config.gamma


def test_classifier_checkpoint_round_trip(tmp_path):
    net = mlp_new([2, 8, 1], output_activation="sigmoid", seed=1)
    path = tmp_path / "f.json"
    save_checkpoint(path, net, {})
    loaded = load_checkpoint(path, KIND_CLASSIFIER)
    x = np.array([0.3, 0.7])
    assert np.array_equal(net.forward(x), loaded.forward(x))


def test_checkpoint_wrong_kind_rejected(tmp_path):
    critic = RiskCritic(2, 2, CriticConfig(), seed=0)
    path = tmp_path / "c.json"
    save_checkpoint(path, critic, {})
    with pytest.raises(CheckpointError, match="expected a policy-ensemble"):
        load_checkpoint(path, KIND_POLICY)


def test_checkpoint_future_version_rejected(tmp_path):
    critic = RiskCritic(2, 2, CriticConfig(), seed=0)
    path = tmp_path / "c.json"
    save_checkpoint(path, critic, {})
    doc = json.loads(path.read_text())
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(path)
    assert "99" in str(err.value) and "1" in str(err.value)


def test_thresholds_round_trip(tmp_path):
    th = GateThresholds(0.9, 0.4, 0.001, 0.0002, 0.01)
    path = tmp_path / "th.json"
    save_thresholds(path, th)
    assert load_thresholds(path) == th


def test_config_round_trip(tmp_path):
    config = RunConfig(
        algorithm="lazydagger",
        seed=11,
        env=EnvConfig(noise_std=0.02),
        policy=PolicyConfig(init_train_steps=123, hidden_sizes=(32, 16)),
        alpha=0.05,
    )
    path = tmp_path / "cfg.json"
    save_config(path, config)
    loaded = load_config(path)
    assert loaded == config
    assert config_hash(loaded) == config_hash(config)


def test_config_dict_round_trip_preserves_nested_types():
    config = RunConfig(algorithm="thrifty", max_episodes=5)
    doc = json.loads(json.dumps(config_to_dict(config)))
    loaded = config_from_dict(doc)
    assert loaded == config
    assert isinstance(loaded.env.wall_x_band, tuple)
