import threading

import numpy as np
import pytest

from thrifty.env import EnvConfig, run_episode
from thrifty.supervisors import (
    DISENGAGE,
    ENGAGE,
    STAY,
    ActionMailbox,
    OracleConfig,
    RemoteSupervisor,
    SupervisorUnavailable,
    SyntheticGater,
    SyntheticGaterConfig,
    noisy_oracle_action,
    oracle_action,
)


def test_oracle_heads_to_waypoint_clipped():
    cfg = OracleConfig()
    env = EnvConfig()
    a = oracle_action(cfg, env, np.array([0.1, 0.5]))
    assert np.allclose(a, [0.05, 0.0])


def test_oracle_heads_to_gap_exit_inside_band_region():
    a = oracle_action(OracleConfig(), EnvConfig(), np.array([0.5, 0.5]))
    assert np.allclose(a, [0.05, 0.0])


def test_oracle_completes_from_all_corner_starts():
    env = EnvConfig(noise_std=0.0)
    oracle = OracleConfig()
    for x in (0.05, 0.2):
        for y in (0.1, 0.9):
            cfg = EnvConfig(noise_std=0.0, start_x=(x, x), start_y=(y, y))
            steps, success = run_episode(
                cfg, lambda s: oracle_action(oracle, env, s), np.random.default_rng(0)
            )
            assert success, f"oracle failed from ({x}, {y})"
            assert len(steps) <= cfg.horizon


def test_noisy_oracle_degenerates_to_oracle():
    env = EnvConfig()
    cfg = OracleConfig(noise_std=0.0)
    s = np.array([0.3, 0.7])
    a = noisy_oracle_action(cfg, env, s, np.random.default_rng(0))
    assert np.allclose(a, oracle_action(cfg, env, s))


def test_noisy_oracle_reproducible():
    env = EnvConfig()
    cfg = OracleConfig(noise_std=0.02)
    s = np.array([0.3, 0.7])
    a = noisy_oracle_action(cfg, env, s, np.random.default_rng(11))
    b = noisy_oracle_action(cfg, env, s, np.random.default_rng(11))
    assert np.array_equal(a, b)


def test_noisy_oracle_empirical_std():
    # pick a state whose clean action is well inside the clip box so the
    # added noise is never truncated
    env = EnvConfig()
    cfg = OracleConfig(noise_std=0.005)
    s = np.array([0.899, 0.5])
    clean = oracle_action(cfg, env, s)
    rng = np.random.default_rng(123)
    draws = np.array([noisy_oracle_action(cfg, env, s, rng) - clean for _ in range(10_000)])
    assert abs(draws.std() - cfg.noise_std) / cfg.noise_std < 0.10


def test_gater_engages_above_threshold():
    g = SyntheticGater(SyntheticGaterConfig())
    # squared L2 of (0.15, 0) is 0.0225 > 0.01
    assert g.decide(np.array([0.15, 0.0]), np.array([0.0, 0.0])) == ENGAGE
    assert g.engaged


def test_gater_disengages_after_patience():
    g = SyntheticGater(SyntheticGaterConfig(patience=3))
    g.engaged = True
    calm = np.array([0.001, 0.0])
    zero = np.zeros(2)
    assert g.decide(calm, zero) == STAY
    assert g.decide(calm, zero) == STAY
    assert g.decide(calm, zero) == DISENGAGE
    assert not g.engaged


def test_gater_counter_resets_on_loud_step():
    g = SyntheticGater(SyntheticGaterConfig(patience=3))
    g.engaged = True
    calm = np.array([0.001, 0.0])
    loud = np.array([0.2, 0.0])
    zero = np.zeros(2)
    assert g.decide(calm, zero) == STAY
    assert g.decide(loud, zero) == STAY  # resets the calm counter
    assert g.decide(calm, zero) == STAY
    assert g.decide(calm, zero) == STAY
    assert g.decide(calm, zero) == DISENGAGE


def test_gater_never_engages_and_disengages_same_step():
    g = SyntheticGater(SyntheticGaterConfig(patience=1))
    rng = np.random.default_rng(0)
    for _ in range(500):
        before = g.engaged
        decision = g.decide(rng.normal(scale=0.1, size=2), rng.normal(scale=0.1, size=2))
        if decision == ENGAGE:
            assert not before
        if decision == DISENGAGE:
            assert before


def test_gater_config_validation():
    with pytest.raises(ValueError):
        SyntheticGaterConfig(patience=0)
    with pytest.raises(ValueError):
        SyntheticGaterConfig(disengage_factor=1.5)


def test_remote_supervisor_pass_through():
    env = EnvConfig()
    box = ActionMailbox()
    sup = RemoteSupervisor(box, env)
    box.post(0, np.array([0.03, 0.0]))
    a = sup.remote_action(0, np.array([0.5, 0.5]))
    assert np.allclose(a, [0.03, 0.0])


def test_remote_supervisor_clips():
    env = EnvConfig()
    box = ActionMailbox()
    sup = RemoteSupervisor(box, env)
    box.post(1, np.array([1.0, -1.0]))
    assert np.allclose(sup.remote_action(1, np.zeros(2)), [0.05, -0.05])


def test_remote_supervisor_unavailable_on_close():
    box = ActionMailbox()
    sup = RemoteSupervisor(box, EnvConfig())
    box.close()
    with pytest.raises(SupervisorUnavailable):
        sup.remote_action(0, np.zeros(2))


def test_remote_supervisor_latest_message_wins():
    box = ActionMailbox()
    sup = RemoteSupervisor(box, EnvConfig())
    box.post(0, np.array([0.01, 0.0]))
    box.post(0, np.array([0.02, 0.0]))
    assert np.allclose(sup.remote_action(0, np.zeros(2)), [0.02, 0.0])


def test_remote_supervisor_blocks_until_posted():
    box = ActionMailbox()
    sup = RemoteSupervisor(box, EnvConfig(), timeout=5.0)
    result = {}

    def consumer():
        result["action"] = sup.remote_action(0, np.zeros(2))

    t = threading.Thread(target=consumer)
    t.start()
    box.post(0, np.array([0.04, 0.0]))
    t.join(timeout=5.0)
    assert not t.is_alive()
    assert np.allclose(result["action"], [0.04, 0.0])
