"""Method dispatch, comparison sweeps and table aggregation."""
from __future__ import annotations

import csv
import json
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import run_comtraq, run_naive_mpc, run_passive_mpc, run_vanilla_episode
from .metrics import compute_metrics
from .svg import write_overlay

# Output order of every table: the three baselines, then ComTraQ-MPC.
METHOD_ORDER = ("passive-mpc", "vanilla-dqn", "naive-mpc", "comtraq")
METRIC_FIELDS = ("waypoints_followed", "mae", "goal_reached", "updates_used", "steps")


@dataclass
class Networks:
    comtraq: object = None
    vanilla: object = None


def run_method(method: str, task, seed: int, settings, nets: Networks):
    kw = dict(env_cfg=settings.env, dyn=settings.dynamics, mpc_cfg=settings.mpc)
    if method == "passive-mpc":
        return run_passive_mpc(task, seed, **kw)
    if method == "naive-mpc":
        return run_naive_mpc(task, seed, **kw)
    if method == "comtraq":
        if nets.comtraq is None:
            raise RuntimeError("comtraq needs a scheduler checkpoint")
        return run_comtraq(task, nets.comtraq, seed, **kw)
    if method == "vanilla-dqn":
        if nets.vanilla is None:
            raise RuntimeError("vanilla-dqn needs a vanilla checkpoint")
        return run_vanilla_episode(task, nets.vanilla, seed, **kw)
    raise ValueError(f"unknown method {method!r}; valid methods: {', '.join(METHOD_ORDER)}")


def run_comparison(tasks, seeds, settings, nets: Networks, methods=METHOD_ORDER, log_dir=None) -> list:
    """One row per (task, method, seed). A failing cell is recorded with its
    error and the sweep continues."""
    rows = []
    for task in tasks:
        for method in methods:
            for seed in seeds:
                row = {"task": task.name, "method": method, "seed": seed, "error": ""}
                try:
                    elog = run_method(method, task, seed, settings, nets)
                    row.update(compute_metrics(elog, task.trajectory, settings.radius).to_dict())
                    if log_dir is not None:
                        d = Path(log_dir) / task.name / method
                        d.mkdir(parents=True, exist_ok=True)
                        elog.write(d / f"seed{seed}.csv", d / f"seed{seed}.json")
                except Exception as exc:  # recorded per cell
                    row.update({k: math.nan for k in METRIC_FIELDS})
                    row["error"] = f"{type(exc).__name__}: {exc}"
                rows.append(row)
    return rows


def aggregate(rows) -> list:
    """Mean and std of every metric per (task, method), in table order."""
    tasks = list(dict.fromkeys(r["task"] for r in rows))
    methods = [m for m in METHOD_ORDER if any(r["method"] == m for r in rows)]
    out = []
    for t in tasks:
        for m in methods:
            cell = [r for r in rows if r["task"] == t and r["method"] == m and not r["error"]]
            agg = {"task": t, "method": m, "n": len(cell)}
            for f in METRIC_FIELDS:
                vals = np.array([float(r[f]) for r in cell])
                agg[f"{f}_mean"] = float(vals.mean()) if len(vals) else math.nan
                agg[f"{f}_std"] = float(vals.std()) if len(vals) else math.nan
            out.append(agg)
    return out


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def format_table(agg) -> str:
    lines = [f"{'task':<12} {'method':<12} {'waypoints followed':>22} {'MAE [m]':>18} {'goal rate':>10} {'updates':>8}"]
    for a in agg:
        lines.append(
            f"{a['task']:<12} {a['method']:<12} "
            f"{a['waypoints_followed_mean']:>10.1f} ± {a['waypoints_followed_std']:<9.1f} "
            f"{a['mae_mean']:>7.3f} ± {a['mae_std']:<8.3f} "
            f"{a['goal_reached_mean']:>10.2f} {a['updates_used_mean']:>8.1f}"
        )
    return "\n".join(lines) + "\n"


def write_eval_outputs(elog, task, out_dir, radius: float) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    elog.write(out_dir / "episode.csv", out_dir / "summary.json")
    report = compute_metrics(elog, task.trajectory, radius)
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_overlay(elog, task.trajectory, out_dir / "overlay.svg")
    return report.to_dict()
