"""Persistence: JSONL datasets, versioned JSON checkpoints, run configs.

Checkpoints carry enough architecture to rebuild the model exactly; weight
arrays round-trip bit-exactly through JSON (floats serialize via repr).
Loading refuses unknown format versions and mismatched model kinds instead
of silently migrating.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from .critic import CriticConfig, RiskCritic
from .engine import CriticTrainConfig, PolicyConfig, RunConfig
from .ensemble import Dataset, EnsemblePolicy, Transition
from .env import EnvConfig
from .gate import GateThresholds
from .nets import Mlp
from .supervisors import OracleConfig, SyntheticGaterConfig

FORMAT_VERSION = 1
KIND_POLICY = "policy-ensemble"
KIND_CRITIC = "critic"
KIND_CLASSIFIER = "classifier"


class CheckpointError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Datasets.


def save_dataset(path: str | Path, dataset: Dataset) -> None:
    with open(path, "w") as fh:
        for t in dataset:
            fh.write(
                json.dumps(
                    {
                        "state": t.state.tolist(),
                        "action": t.action.tolist(),
                        "next_state": t.next_state.tolist(),
                        "goal_flag": int(t.goal_flag),
                        "source_mode": t.source_mode,
                    }
                )
                + "\n"
            )


def load_dataset(path: str | Path, expected_dim: int | None = 2) -> Dataset:
    """Load a JSONL dataset, validating dimensions; errors cite the offending line."""
    data = Dataset()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                state = np.asarray(rec["state"], dtype=np.float64)
                action = np.asarray(rec["action"], dtype=np.float64)
                nxt = np.asarray(rec["next_state"], dtype=np.float64)
                flag = int(rec["goal_flag"])
                source = rec["source_mode"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: malformed transition on line {lineno}: {exc}") from exc
            if expected_dim is not None and (state.shape != (expected_dim,) or nxt.shape != (expected_dim,)):
                raise ValueError(f"{path}: bad state dimension on line {lineno}")
            data.append(Transition(state, action, nxt, flag, source))
    return data


# ---------------------------------------------------------------------------
# Checkpoints.


def _mlp_payload(mlp: Mlp) -> dict:
    return {
        "layer_sizes": mlp.layer_sizes,
        "hidden_activation": mlp.hidden_activation,
        "output_activation": mlp.output_activation,
        "weights": [w.tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }


def _mlp_from_payload(payload: dict) -> Mlp:
    return Mlp(
        list(payload["layer_sizes"]),
        [np.asarray(w, dtype=np.float64) for w in payload["weights"]],
        [np.asarray(b, dtype=np.float64) for b in payload["biases"]],
        payload["hidden_activation"],
        payload["output_activation"],
    )


def save_checkpoint(path: str | Path, model, metadata: dict | None = None) -> None:
    if isinstance(model, EnsemblePolicy):
        kind = KIND_POLICY
        payload = {
            "action_max": model.action_max,
            "output_scale": model.output_scale,
            "members": [_mlp_payload(m) for m in model.members],
            "priors": [_mlp_payload(p) for p in model.priors] if model.priors is not None else None,
            "prior_scale": model.prior_scale,
        }
    elif isinstance(model, RiskCritic):
        kind = KIND_CRITIC
        payload = {
            "state_dim": model.state_dim,
            "action_dim": model.action_dim,
            "action_scale": model.action_scale,
            "config": dataclasses.asdict(model.config),
            "q_net": _mlp_payload(model.q_net),
            "target_net": _mlp_payload(model.target_net),
            "steps_trained": model.steps_trained,
        }
    elif isinstance(model, Mlp):
        kind = KIND_CLASSIFIER
        payload = {"net": _mlp_payload(model)}
    else:
        raise CheckpointError(f"cannot checkpoint a {type(model).__name__}")
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "model": payload,
        "metadata": metadata or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path: str | Path, expected_kind: str | None = None):
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint format_version {version} not supported (this build reads {FORMAT_VERSION})"
        )
    kind = doc.get("kind")
    if expected_kind is not None and kind != expected_kind:
        raise CheckpointError(f"{path}: expected a {expected_kind} checkpoint, found {kind}")
    payload = doc["model"]
    if kind == KIND_POLICY:
        members = [_mlp_from_payload(p) for p in payload["members"]]
        priors = None
        if payload.get("priors") is not None:
            priors = [_mlp_from_payload(p) for p in payload["priors"]]
        return EnsemblePolicy(
            members,
            float(payload["action_max"]),
            priors,
            float(payload.get("prior_scale", 1.0)),
            float(payload["output_scale"]) if payload.get("output_scale") is not None else None,
        )
    if kind == KIND_CRITIC:
        cfg_d = dict(payload["config"])
        cfg_d["hidden_sizes"] = tuple(cfg_d["hidden_sizes"])
        critic = RiskCritic(
            int(payload["state_dim"]),
            int(payload["action_dim"]),
            CriticConfig(**cfg_d),
            action_scale=float(payload.get("action_scale", 1.0)),
        )
        critic.q_net = _mlp_from_payload(payload["q_net"])
        critic.target_net = _mlp_from_payload(payload["target_net"])
        critic.steps_trained = int(payload["steps_trained"])
        return critic
    if kind == KIND_CLASSIFIER:
        return _mlp_from_payload(payload["net"])
    raise CheckpointError(f"{path}: unknown checkpoint kind {kind!r}")


def save_thresholds(path: str | Path, thresholds: GateThresholds) -> None:
    with open(path, "w") as fh:
        json.dump(thresholds.as_dict(), fh)


def load_thresholds(path: str | Path) -> GateThresholds:
    with open(path) as fh:
        d = json.load(fh)
    return GateThresholds(
        risk_intervene=d["risk_intervene"],
        risk_cede=d["risk_cede"],
        novelty_intervene=d["novelty_intervene"],
        discrepancy_cede=d["discrepancy_cede"],
        budget=d["budget"],
    )


# ---------------------------------------------------------------------------
# Run configuration: one JSON document; CLI flags override keys.


def config_to_dict(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def _tupled(d: dict, keys) -> dict:
    out = dict(d)
    for k in keys:
        if k in out and out[k] is not None:
            out[k] = tuple(out[k])
    return out


def config_from_dict(doc: dict) -> RunConfig:
    doc = dict(doc)
    env = EnvConfig(**_tupled(doc.pop("env", {}), ["wall_x_band", "gap_y", "goal_center", "start_x", "start_y"]))
    oracle = OracleConfig(**_tupled(doc.pop("oracle", {}), ["waypoint", "gap_exit"]))
    policy = PolicyConfig(**_tupled(doc.pop("policy", {}), ["hidden_sizes"]))
    critic_d = dict(doc.pop("critic", {}))
    model = CriticConfig(**_tupled(critic_d.pop("model", {}), ["hidden_sizes"]))
    critic = CriticTrainConfig(model=model, **critic_d)
    gater = SyntheticGaterConfig(**doc.pop("gater", {}))
    return RunConfig(env=env, oracle=oracle, policy=policy, critic=critic, gater=gater, **doc)


def config_hash(config: RunConfig) -> str:
    blob = json.dumps(config_to_dict(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_config(path: str | Path, config: RunConfig) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(config), fh, indent=2, sort_keys=True)


def load_config(path: str | Path) -> RunConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))
