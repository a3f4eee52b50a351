"""Command-line interface: demo collection, training, evaluation, fleet runs, export.

Run directories hold everything needed to resume or evaluate: the exact
run configuration, per-episode metrics as JSONL (byte-deterministic for a
fixed seed), and versioned model checkpoints.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as iomod
from .engine import (
    ALGORITHMS,
    ClassifierGate,
    HumanGate,
    LazyGate,
    RunConfig,
    RunResult,
    ThriftyGate,
    collect_demos,
    evaluate,
    run_algorithm,
)
from .fleet import Fleet, FleetConfig, run_fleet
from .gateway import GatewayServer, default_bind_addr
from .metrics import aggregate, to_csv, to_jsonl
from .presets import default_config, desk_config
from .supervisors import RemoteSupervisor, SyntheticGater, oracle_action

log = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thrifty", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration JSON (flags override keys)")
    common.add_argument("--desk", action="store_true", help="start from the desk-scale benchmark preset")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--noise", type=float, default=None, help="override environment process noise std")

    p = sub.add_parser("demo-collect", parents=[common], help="collect oracle demonstrations")
    p.add_argument("--demos", type=int, default=30)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", parents=[common], help="train one algorithm")
    p.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    p.add_argument("--ablate", choices=("novelty", "risk"))
    p.add_argument("--alpha", type=float, default=None, help="intervention budget")
    p.add_argument("--steps", type=int, default=None, help="interactive environment step budget")
    p.add_argument("--episodes", type=int, default=None, help="episode cap (default: budget-bound)")
    p.add_argument("--demos", type=int, default=None)
    p.add_argument("--retrain-from-scratch", action="store_true")
    p.add_argument("--dr-every-episode", action="store_true")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--save-datasets", action="store_true")
    p.add_argument("--gateway", nargs="?", const="default", default=None, metavar="ADDR",
                   help="serve a gateway and use the remote human as supervisor")

    p = sub.add_parser("eval", parents=[common], help="evaluate a trained run directory")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--autonomous", action="store_true")
    mode.add_argument("--with-interventions", action="store_true")
    p.add_argument("--run-dir", type=Path, required=True)
    p.add_argument("--episodes", type=int, default=100)

    p = sub.add_parser("fleet", parents=[common], help="run the multi-robot supervision simulator")
    p.add_argument("--run-dir", type=Path, required=True)
    p.add_argument("--robots", type=int, default=3)
    p.add_argument("--steps", type=int, default=350)
    p.add_argument("--keep-acting", action="store_true", help="queued robots keep acting instead of freezing")
    p.add_argument("--trace", type=Path, help="write a tick-by-tick JSONL trace")
    p.add_argument("--gateway", nargs="?", const="default", default=None, metavar="ADDR")

    p = sub.add_parser("export", parents=[common], help="export run metrics")
    p.add_argument("--run-dir", type=Path, required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), required=True)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")

    return parser


def _load_base_config(args, parser) -> RunConfig:
    if args.config is not None:
        if not args.config.exists():
            parser.error(f"config file not found: {args.config}")
        config = iomod.load_config(args.config)
    elif args.desk:
        config = desk_config()
    else:
        config = default_config()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.noise is not None:
        overrides["env"] = dataclasses.replace(config.env, noise_std=args.noise)
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _parse_gateway_addr(value: str) -> tuple[str, int]:
    if value == "default":
        return default_bind_addr()
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


# ---------------------------------------------------------------------------
# Subcommand implementations.


def _cmd_demo_collect(args, parser) -> int:
    config = _load_base_config(args, parser)
    if args.demos < 1:
        parser.error("--demos must be >= 1")
    rng = np.random.default_rng(config.seed)
    data = collect_demos(config.env, config.oracle, args.demos, rng)
    iomod.save_dataset(args.out, data)
    print(f"wrote {len(data)} transitions from {args.demos} demos to {args.out}")
    return 0


def _write_run_dir(out_dir: Path, result: RunResult, save_datasets: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    iomod.save_config(out_dir / "run_config.json", result.config)
    with open(out_dir / "metrics.jsonl", "w") as fh:
        for record in result.episode_records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    meta = {"seed": result.config.seed, "config_hash": iomod.config_hash(result.config)}
    iomod.save_checkpoint(out_dir / "policy.json", result.policy, meta)
    if result.critic is not None:
        iomod.save_checkpoint(out_dir / "critic.json", result.critic, meta)
    if result.classifier is not None:
        iomod.save_checkpoint(out_dir / "classifier.json", result.classifier, meta)
    if result.thresholds is not None:
        iomod.save_thresholds(out_dir / "thresholds.json", result.thresholds)
    run_metrics = aggregate(result.episode_stats, latency=result.config.latency)
    summary = {
        "algorithm": result.config.algorithm,
        "interactive_steps": result.interactive_steps,
        "rollout_steps": result.rollout_steps,
        "episodes": len(result.episode_records),
        "dh_size": len(result.dataset_h),
        "dr_size": len(result.dataset_r),
        "metrics": dataclasses.asdict(run_metrics),
        "thresholds_history": [t.as_dict() for t in result.thresholds_history],
    }
    with open(out_dir / "result.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    if save_datasets:
        iomod.save_dataset(out_dir / "dataset_h.jsonl", result.dataset_h)
        iomod.save_dataset(out_dir / "dataset_r.jsonl", result.dataset_r)


def _cmd_train(args, parser) -> int:
    config = _load_base_config(args, parser)
    if args.ablate and args.algorithm != "thrifty":
        parser.error("--ablate only applies to --algorithm thrifty")
    overrides: dict = {"algorithm": args.algorithm}
    if args.ablate:
        overrides["ablate"] = args.ablate
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.steps is not None:
        overrides["step_budget"] = args.steps
    if args.episodes is not None:
        overrides["max_episodes"] = args.episodes
    if args.demos is not None:
        overrides["num_demos"] = args.demos
    if args.retrain_from_scratch:
        overrides["retrain_from_scratch"] = True
    if args.dr_every_episode:
        overrides["dr_every_episode"] = True
    config = dataclasses.replace(config, **overrides)

    supervisor_fn = None
    server = None
    if args.gateway is not None:
        host, port = _parse_gateway_addr(args.gateway)
        server = GatewayServer(host, port, env=config.env, n_robots=1)
        addr = server.start()
        print(f"gateway listening on {addr[0]}:{addr[1]}; waiting for a supervisor client...")
        server.wait_for_client()
        remote = RemoteSupervisor(server.mailbox, config.env)

        def supervisor_fn(state):
            server.send(
                "intervention_request",
                robot_id=0,
                payload={"state": [float(state[0]), float(state[1])]},
            )
            return remote.remote_action(0, state)

    try:
        result = run_algorithm(config, supervisor_fn)
    finally:
        if server is not None:
            server.stop()
    _write_run_dir(args.out_dir, result, args.save_datasets)
    run_metrics = aggregate(result.episode_stats, latency=config.latency)
    print(
        f"{config.algorithm}: {len(result.episode_records)} episodes, "
        f"{result.interactive_steps} interactive steps, "
        f"T Ints {run_metrics.total_ints}, T Acts (H) {run_metrics.total_acts_h}, "
        f"T Acts (R) {run_metrics.total_acts_r}"
    )
    print(f"run directory: {args.out_dir}")
    return 0


def _load_gate(run_dir: Path, config: RunConfig, policy, parser):
    """Rebuild the trained run's gate for gated evaluation or fleet serving."""
    algo = config.algorithm
    if algo == "thrifty":
        critic_path = run_dir / "critic.json"
        thresholds_path = run_dir / "thresholds.json"
        if not critic_path.exists() or not thresholds_path.exists():
            parser.error(f"{run_dir} lacks critic/thresholds checkpoints needed for gating")
        critic = iomod.load_checkpoint(critic_path, iomod.KIND_CRITIC)
        thresholds = iomod.load_thresholds(thresholds_path)
        return lambda: ThriftyGate(policy, critic, thresholds, config.ablate)
    if algo in ("safedagger", "lazydagger"):
        classifier_path = run_dir / "classifier.json"
        if not classifier_path.exists():
            parser.error(f"{run_dir} lacks the classifier checkpoint needed for gating")
        classifier = iomod.load_checkpoint(classifier_path, iomod.KIND_CLASSIFIER)
        if algo == "lazydagger":
            clean_fn = lambda s: oracle_action(config.oracle, config.env, s)
            return lambda: LazyGate(classifier, config.lazydagger_tau_a, config.env.action_max, clean_fn)
        return lambda: ClassifierGate(classifier)
    if algo == "hgdagger":
        oracle_fn = lambda s: oracle_action(config.oracle, config.env, s)
        return lambda: HumanGate(SyntheticGater(config.gater), oracle_fn, action_scale=config.env.action_max)
    parser.error(f"algorithm {algo!r} has no intervention gate")


def _cmd_eval(args, parser) -> int:
    run_dir = args.run_dir
    if not (run_dir / "run_config.json").exists():
        parser.error(f"not a run directory: {run_dir}")
    config = iomod.load_config(run_dir / "run_config.json")
    if args.noise is not None:
        config = dataclasses.replace(config, env=dataclasses.replace(config.env, noise_std=args.noise))
    policy = iomod.load_checkpoint(run_dir / "policy.json", iomod.KIND_POLICY)
    seed = args.seed if args.seed is not None else config.seed
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE7A1]))
    if args.autonomous:
        stats = evaluate(policy, config.env, args.episodes, rng)
        print(f"Auto Succ: {stats.successes}/{stats.episodes}")
    else:
        gate_factory = _load_gate(run_dir, config, policy, parser)
        supervisor = lambda s: oracle_action(config.oracle, config.env, s)
        stats = evaluate(policy, config.env, args.episodes, rng, supervisor_fn=supervisor, gate=gate_factory())
        ints = sum(s.ints for s in stats.per_episode)
        acts_h = sum(s.acts_h for s in stats.per_episode)
        print(f"Int-Aided Succ: {stats.successes}/{stats.episodes} (T Ints {ints}, T Acts (H) {acts_h})")
    return 0


def _cmd_fleet(args, parser) -> int:
    run_dir = args.run_dir
    if not (run_dir / "run_config.json").exists():
        parser.error(f"not a run directory: {run_dir}")
    config = iomod.load_config(run_dir / "run_config.json")
    if args.noise is not None:
        config = dataclasses.replace(config, env=dataclasses.replace(config.env, noise_std=args.noise))
    policy = iomod.load_checkpoint(run_dir / "policy.json", iomod.KIND_POLICY)
    gate_factory = _load_gate(run_dir, config, policy, parser)
    seed = args.seed if args.seed is not None else config.seed
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF1EE]))

    fleet_config = FleetConfig(n_robots=args.robots, steps=args.steps, freeze_queued=not args.keep_acting)
    server = None
    if args.gateway is not None:
        host, port = _parse_gateway_addr(args.gateway)
        server = GatewayServer(host, port, env=config.env, n_robots=args.robots)
        addr = server.start()
        print(f"gateway listening on {addr[0]}:{addr[1]}; waiting for a supervisor client...")
        server.wait_for_client()
        remote = RemoteSupervisor(server.mailbox, config.env)

        def supervisor_fn(robot_id, state):
            # prompt before blocking: the tick stalls until the human answers
            server.send(
                "intervention_request",
                robot_id=robot_id,
                payload={"state": [float(state[0]), float(state[1])]},
            )
            return remote.remote_action(robot_id, state)
    else:
        supervisor_fn = lambda robot_id, s: oracle_action(config.oracle, config.env, s)

    fleet = Fleet(
        config.env,
        policy,
        [gate_factory() for _ in range(args.robots)],
        supervisor_fn,
        fleet_config,
        rng,
    )
    if server is not None:
        server.on_disconnect = lambda reason: fleet.release_supervision()
        server.on_connect = lambda session: fleet.reopen_supervision()

    trace_fh = open(args.trace, "w") if args.trace else None

    def sink(snapshot, events):
        if trace_fh is not None:
            trace_fh.write(json.dumps({"snapshot": snapshot, "events": events}, sort_keys=True) + "\n")
        if server is not None:
            server.broadcast_tick(snapshot, events)

    try:
        metrics = run_fleet(fleet, trace_sink=sink)
    finally:
        if trace_fh is not None:
            trace_fh.close()
        if server is not None:
            server.stop()
    print(
        f"fleet: throughput {metrics.throughput}, T Ints {metrics.total_ints}, "
        f"T Acts (H) {metrics.total_acts_h}, T Acts (R) {metrics.total_acts_r}, "
        f"mean idle {metrics.mean_idle:.1f} ticks over {metrics.ticks} ticks"
    )
    return 0


def _cmd_export(args, parser) -> int:
    result_path = args.run_dir / "result.json"
    if not result_path.exists():
        parser.error(f"no result.json under {args.run_dir}")
    with open(result_path) as fh:
        summary = json.load(fh)
    from .metrics import RunMetrics

    m = summary["metrics"]
    m["auto_success"] = tuple(m["auto_success"]) if m.get("auto_success") else None
    m["aided_success"] = tuple(m["aided_success"]) if m.get("aided_success") else None
    metrics = RunMetrics(**m)
    label = summary.get("algorithm", "run")
    out = to_csv({label: metrics}) if args.format == "csv" else to_jsonl({label: metrics})
    if args.out:
        args.out.write_text(out)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(out)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "demo-collect": _cmd_demo_collect,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "fleet": _cmd_fleet,
        "export": _cmd_export,
    }
    return handlers[args.command](args, parser)


if __name__ == "__main__":
    sys.exit(main())
