"""Command-line entry point: ``comtraq {train,eval,compare,metrics}``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import VANILLA_FEATURES, read_episode_csv, train_vanilla_dqn, EpisodeLog
from .config import ConfigError, Settings, load_config
from .harness import (
    METHOD_ORDER, METRIC_FIELDS, Networks, aggregate, format_table, rows_to_csv, run_comparison,
    run_method, write_eval_outputs,
)
from .metrics import compute_metrics
from .qnet import CheckpointError, load_checkpoint, read_checkpoint_meta, save_checkpoint
from .scheduler import LAYER_SIZES, meta_train, train_digest
from .tasks import SCENARIOS, TaskSpec, budget_for, builtin_scenario, read_suite, read_trajectory_csv, sample_suite, write_suite

log = logging.getLogger("comtraq")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _settings(args) -> Settings:
    s = load_config(args.config) if getattr(args, "config", None) else Settings()
    if getattr(args, "seed", None) is not None:
        s.seed = args.seed
    return s


def _load_tasks(args) -> list:
    if args.scenario:
        return [builtin_scenario(args.scenario)]
    if not args.task:
        raise UsageError("one of --task or --scenario is required")
    path = Path(args.task)
    if not path.exists():
        raise UsageError(f"task file {path} does not exist")
    with open(path) as fh:
        header = fh.readline().strip()
    if header.startswith("name,"):
        return read_suite(path)
    traj = read_trajectory_csv(path)
    budget = args.budget if args.budget is not None else budget_for(len(traj), 0.08)
    return [TaskSpec(traj, budget, path.stem)]


def _load_networks(path, settings: Settings, warnings=None) -> Networks:
    """``path`` is a training output directory or a single checkpoint file."""
    path = Path(path)
    files = [path / "checkpoint.npz", path / "vanilla.npz"] if path.is_dir() else [path]
    nets = Networks()
    digest = train_digest(settings.train, settings.env, settings.dynamics, settings.mpc)
    for f in files:
        if not f.exists():
            continue
        sizes = tuple(read_checkpoint_meta(f)["sizes"])
        if sizes[0] == VANILLA_FEATURES:
            nets.vanilla = load_checkpoint(f)
        else:
            nets.comtraq = load_checkpoint(f, expected_sizes=(LAYER_SIZES[0], *settings.train.hidden, 2),
                                           expected_digest=digest, warnings=warnings)
    return nets


def cmd_train(args) -> int:
    s = _settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ss = np.random.SeedSequence(s.seed)
    tasks = sample_suite(s.train.n_tasks, s.tasks, np.random.default_rng(ss.spawn(1)[0]), s.dynamics)
    write_suite(tasks, out / "tasks")
    net, tlog = meta_train(tasks, s.train, s.seed, s.env, s.dynamics, s.mpc, progress_every=args.log_every)
    save_checkpoint(net, out / "checkpoint.npz", cfg={"train": s.train, "env": s.env, "dyn": s.dynamics, "mpc": s.mpc},
                    seed=s.seed, extra={"digest": train_digest(s.train, s.env, s.dynamics, s.mpc)})
    tlog.write_csv(out / "train_log.csv")
    if s.vanilla.total_env_steps > 0:
        vnet, vlog = train_vanilla_dqn(tasks, s.vanilla, s.seed, s.env, s.dynamics, s.mpc)
        save_checkpoint(vnet, out / "vanilla.npz", cfg={"vanilla": s.vanilla}, seed=s.seed)
        vlog.write_csv(out / "vanilla_train_log.csv")
    print(f"wrote {out / 'checkpoint.npz'} ({len(tlog.rows)} episodes, {len(tasks)} tasks)")
    return EXIT_OK


def cmd_eval(args) -> int:
    s = _settings(args)
    tasks = _load_tasks(args)
    task = tasks[args.task_index]
    nets = _load_networks(args.checkpoint, s) if args.checkpoint else Networks()
    elog = run_method(args.method, task, s.seed, s, nets)
    report = write_eval_outputs(elog, task, args.out, s.radius)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_compare(args) -> int:
    s = _settings(args)
    tasks = _load_tasks(args)
    warnings = []
    nets = _load_networks(args.checkpoint, s, warnings)
    for w in warnings:
        log.warning(w)
    methods = [m for m in METHOD_ORDER if (m != "comtraq" or nets.comtraq) and (m != "vanilla-dqn" or nets.vanilla)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(range(s.seed, s.seed + args.seeds))
    rows = run_comparison(tasks, seeds, s, nets, methods, log_dir=out / "logs")
    (out / "episodes.csv").write_text(rows_to_csv(rows, ["task", "method", "seed", *METRIC_FIELDS, "error"]))
    agg = aggregate(rows)
    cols = ["task", "method", "n"] + [f"{f}_{k}" for f in METRIC_FIELDS for k in ("mean", "std")]
    (out / "table.csv").write_text(rows_to_csv(agg, cols))
    table = format_table(agg)
    (out / "table.txt").write_text(table)
    print(table, end="")
    return EXIT_OK


def cmd_metrics(args) -> int:
    traj = read_trajectory_csv(args.trajectory)
    records = read_episode_csv(args.log)
    elog = EpisodeLog("", "", 0, 0, records)
    report = compute_metrics(elog, traj, args.radius)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="comtraq", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="meta-train the localization scheduler")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True)
    t.add_argument("--log-every", type=int, default=0, help="log progress every N episodes")
    t.set_defaults(func=cmd_train)

    def task_args(q):
        q.add_argument("--task", help="trajectory CSV (x,y) or task-suite index CSV")
        q.add_argument("--scenario", choices=sorted(SCENARIOS))
        q.add_argument("--budget", type=int, help="budget for a bare trajectory CSV")
        q.add_argument("--config")
        q.add_argument("--seed", type=int)
        q.add_argument("--out", required=True)

    e = sub.add_parser("eval", help="run one method on one task")
    task_args(e)
    e.add_argument("--checkpoint")
    e.add_argument("--method", required=True, choices=METHOD_ORDER)
    e.add_argument("--task-index", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="run all methods over tasks x seeds")
    task_args(c)
    c.add_argument("--checkpoint", required=True, help="training output directory or checkpoint file")
    c.add_argument("--seeds", type=int, default=5)
    c.set_defaults(func=cmd_compare)

    m = sub.add_parser("metrics", help="compute metrics from an episode CSV")
    m.add_argument("--log", required=True)
    m.add_argument("--trajectory", required=True)
    m.add_argument("--radius", type=float, default=0.1)
    m.add_argument("--out")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, CheckpointError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
