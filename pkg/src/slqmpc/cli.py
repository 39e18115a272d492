"""Experiment runner: load a JSON config, run or compare, write artifacts.

Exit codes: 0 success, 2 config error, 3 solver abort, 4 task failure
(goal not reached or constraints violated beyond the task tolerance).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from typing import Any

import numpy as np

from .dual import RULE_FOR_KIND, DualRule, DualUpdateConfig, check_stability
from .mpc import ComparisonReport, MpcConfig, MpcResult, closed_loop_violation, \
    compare_methods, run_mpc
from .penalties import PenaltyKind, PenaltyStrategy
from .tasks import TASK_NAMES, TaskBundle, build_task
from .trajectory import to_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_TASK = 4

CONFIG_VERSION = 1

METHOD_DEFAULTS = {
    "rho": 20.0,
    "alpha": 2.0,
    "mu": 0.1,
    "delta": 0.1,
    "delta_psi": 0.5,
    "nu_min": 1e-6,
}


class ConfigError(ValueError):
    """Schema violation; the message names the offending field path."""


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _num(obj: dict, key: str, path: str, default=None, positive=False):
    if key not in obj:
        _require(default is not None, f"{path}.{key}", "required field missing")
        return default
    value = obj[key]
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"{path}.{key}", f"expected a number, got {value!r}")
    if positive:
        _require(value > 0, f"{path}.{key}", "must be positive")
    return float(value)


def _validate_method(obj: Any, path: str) -> dict:
    _require(isinstance(obj, dict), path, "expected an object")
    kinds = [k.value for k in PenaltyKind]
    kind = obj.get("kind")
    _require(kind in kinds, f"{path}.kind", f"expected one of {kinds}, got {kind!r}")
    out = {"kind": kind}
    for key, default in METHOD_DEFAULTS.items():
        out[key] = _num(obj, key, path, default=default, positive=True)
    _require(0.0 < out["delta_psi"] < 1.0, f"{path}.delta_psi", "must lie in (0, 1)")
    rules = [r.value for r in DualRule]
    default_rule = RULE_FOR_KIND.get(PenaltyKind(kind), DualRule.PI1).value
    rule = obj.get("rule", default_rule)
    _require(rule in rules, f"{path}.rule", f"expected one of {rules}, got {rule!r}")
    out["rule"] = rule
    out["label"] = str(obj.get("label", kind))
    unknown = set(obj) - set(out)
    _require(not unknown, path, f"unknown fields {sorted(unknown)}")
    return out


def _validate_mpc(obj: Any, path: str, task: TaskBundle) -> dict:
    obj = obj or {}
    _require(isinstance(obj, dict), path, "expected an object")
    out = {
        "mpc_rate": _num(obj, "mpc_rate", path, default=task.mpc_rate, positive=True),
        "horizon": _num(obj, "horizon", path, default=task.horizon, positive=True),
        "initial_solve_iters": int(
            _num(obj, "initial_solve_iters", path, default=10.0, positive=True)
        ),
        "plant_step": _num(obj, "plant_step", path, default=1e-3, positive=True),
        "sim_duration": _num(
            obj, "sim_duration", path, default=task.sim_duration, positive=True
        ),
        "grid_dt": _num(obj, "grid_dt", path, default=task.grid_dt, positive=True),
    }
    _require(out["plant_step"] <= 1.0 / out["mpc_rate"] + 1e-12,
             f"{path}.plant_step", "must not exceed the MPC period")
    unknown = set(obj) - set(out)
    _require(not unknown, path, f"unknown fields {sorted(unknown)}")
    return out


def load_config(path: str, comparison: bool = False) -> dict:
    """Read, validate, and fill defaults; returns the effective config dict."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(raw, comparison=comparison)


def validate_config(raw: Any, comparison: bool = False) -> dict:
    _require(isinstance(raw, dict), "config", "top level must be an object")
    version = raw.get("version", CONFIG_VERSION)
    _require(version == CONFIG_VERSION, "version",
             f"unsupported schema version {version!r}")
    task_name = raw.get("task")
    _require(task_name in TASK_NAMES, "task",
             f"expected one of {TASK_NAMES}, got {task_name!r}")
    task = build_task(task_name)

    effective = {
        "version": CONFIG_VERSION,
        "task": task_name,
        "seed": int(_num(raw, "seed", "config", default=0.0)),
        "output_dir": str(raw.get("output_dir", os.path.join("runs", task_name))),
        "mpc": _validate_mpc(raw.get("mpc"), "mpc", task),
    }
    if comparison:
        methods = raw.get("methods")
        _require(isinstance(methods, list), "methods", "expected a list of methods")
        _require(len(methods) >= 2, "methods",
                 "a comparison needs at least two methods; use `run` for one")
        effective["methods"] = [
            _validate_method(m, f"methods[{i}]") for i, m in enumerate(methods)
        ]
        labels = [m["label"] for m in effective["methods"]]
        _require(len(set(labels)) == len(labels), "methods",
                 "method labels must be unique")
    else:
        _require("method" in raw, "method", "required field missing")
        effective["method"] = _validate_method(raw["method"], "method")
    allowed = {"version", "task", "seed", "output_dir", "mpc",
               "method" if not comparison else "methods"}
    unknown = set(raw) - allowed
    _require(not unknown, "config", f"unknown fields {sorted(unknown)}")
    return effective


def config_hash(effective: dict) -> str:
    canonical = json.dumps(effective, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def build_method(mdict: dict) -> tuple[PenaltyStrategy, DualUpdateConfig]:
    strategy = PenaltyStrategy(
        kind=PenaltyKind(mdict["kind"]),
        rho=mdict["rho"],
        alpha=mdict["alpha"],
        mu=mdict["mu"],
        delta=mdict["delta"],
        delta_psi=mdict["delta_psi"],
        nu_min=mdict["nu_min"],
    )
    dual = DualUpdateConfig(
        alpha=mdict["alpha"],
        rho=mdict["rho"],
        rule=DualRule(mdict["rule"]),
        nu_min=mdict["nu_min"],
        delta_psi=mdict["delta_psi"],
    )
    return strategy, dual


def build_mpc_config(effective: dict, mdict: dict) -> MpcConfig:
    strategy, dual = build_method(mdict)
    m = effective["mpc"]
    return MpcConfig(
        strategy=strategy,
        dual_cfg=dual,
        mpc_rate=m["mpc_rate"],
        horizon=m["horizon"],
        initial_solve_iters=m["initial_solve_iters"],
        plant_step=m["plant_step"],
        sim_duration=m["sim_duration"],
        grid_dt=m["grid_dt"],
    )


def _write_metrics_csv(path: str, result: MpcResult, header: str) -> None:
    m = result.metrics
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "sim_time", "cost", "violation_l2", "max_violation",
             "gamma", "solve_ms"]
        )
        for i in range(m.iteration.size):
            writer.writerow(
                [int(m.iteration[i]), m.sim_time[i], m.cost[i], m.violation_l2[i],
                 m.max_violation[i], m.gamma[i], m.solve_ms[i]]
            )


def _percentiles(values: np.ndarray) -> dict:
    if values.size == 0:
        return {"avg": None, "p50": None, "p90": None, "p99": None, "peak": None}
    return {
        "avg": float(np.mean(values)),
        "p50": float(np.percentile(values, 50)),
        "p90": float(np.percentile(values, 90)),
        "p99": float(np.percentile(values, 99)),
        "peak": float(np.max(values)),
    }


def _run_summary(task: TaskBundle, result: MpcResult, effective: dict,
                 digest: str, exit_code: int, reason: str) -> dict:
    m = result.metrics
    max_cl = closed_loop_violation(task.ocp_template, result)
    return {
        "config_hash": digest,
        "effective_config": effective,
        "exit": {"code": exit_code, "reason": reason},
        "final_cost": None if np.isnan(result.final_cost) else result.final_cost,
        "violation": {
            "mean_l2": float(np.nanmean(m.violation_l2)) if m.violation_l2.size else 0.0,
            "peak_l2": float(np.nanmax(m.violation_l2)) if m.violation_l2.size else 0.0,
            "max_closed_loop": max_cl,
        },
        "task_duration": m.task_completion_time,
        "timing_ms": _percentiles(m.solve_ms[m.riccati_passes > 0]),
        "warnings": list(result.warnings),
        "counters": {
            "ticks": int(m.iteration.size),
            "riccati_passes_tick0": int(m.riccati_passes[0]) if m.riccati_passes.size else 0,
            "solver_failures": int(np.sum(m.solver_failures)),
            "aborted": result.aborted,
        },
    }


def _evaluate_run(task: TaskBundle, result: MpcResult) -> tuple[int, str]:
    if result.aborted:
        return EXIT_SOLVER, f"solver abort: {result.abort_reason}"
    if result.metrics.task_completion_time is None:
        return EXIT_TASK, "task goal was not reached within the simulation"
    max_cl = closed_loop_violation(task.ocp_template, result)
    if max_cl > task.violation_tolerance:
        return EXIT_TASK, (
            f"closed-loop constraint violation {max_cl:.4g} exceeds the task "
            f"tolerance {task.violation_tolerance:.4g}"
        )
    return EXIT_OK, "ok"


def _emit_run_artifacts(out_dir: str, task: TaskBundle, result: MpcResult,
                        effective: dict, digest: str, exit_code: int,
                        reason: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    header = f"config_hash={digest}"
    metrics_path = os.path.join(out_dir, "metrics.csv")
    _write_metrics_csv(metrics_path, result, header)
    traj_path = os.path.join(out_dir, "trajectory.csv")
    n_x = result.x_closed.dim
    n_u = result.u_closed.dim
    from .trajectory import Trajectory

    combined = Trajectory(
        result.x_closed.grid,
        np.concatenate([result.x_closed.values, result.u_closed.values], axis=1),
    )
    names = [f"x{i}" for i in range(n_x)] + [f"u{i}" for i in range(n_u)]
    to_csv(combined, traj_path, names=names, header_comment=header)
    summary = _run_summary(task, result, effective, digest, exit_code, reason)
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    return {"metrics": metrics_path, "trajectory": traj_path, "summary": summary_path}


def run_experiment(config_path: str, output_dir: str | None = None,
                   seed: int | None = None, quiet: bool = False) -> int:
    """Execute one task/method pair and write metrics, trajectory, summary."""
    try:
        effective = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if output_dir is not None:
        effective["output_dir"] = output_dir
    if seed is not None:
        effective["seed"] = seed
    np.random.seed(effective["seed"] % (2**32))

    task = build_task(effective["task"])
    cfg = build_mpc_config(effective, effective["method"])
    digest = config_hash(effective)
    result = run_mpc(task.ocp_template, cfg, task.completion_fn)
    exit_code, reason = _evaluate_run(task, result)
    paths = _emit_run_artifacts(
        effective["output_dir"], task, result, effective, digest, exit_code, reason
    )
    if not quiet:
        print(f"[{effective['task']}] {reason} (exit {exit_code})")
        for kind, p in paths.items():
            print(f"  {kind}: {p}")
        for w in result.warnings:
            print(f"  warning: {w}")
    return exit_code


def run_comparison(config_path: str, output_dir: str | None = None,
                   seed: int | None = None, quiet: bool = False) -> int:
    """Run every configured method on the same task and emit aligned artifacts."""
    try:
        effective = load_config(config_path, comparison=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        print("usage: a comparison config needs a `methods` list with >= 2 entries",
              file=sys.stderr)
        return EXIT_CONFIG
    if output_dir is not None:
        effective["output_dir"] = output_dir
    if seed is not None:
        effective["seed"] = seed
    np.random.seed(effective["seed"] % (2**32))

    task = build_task(effective["task"])
    digest = config_hash(effective)
    labeled = [
        (m["label"], build_mpc_config(effective, m)) for m in effective["methods"]
    ]
    report = compare_methods(task.ocp_template, labeled, task.completion_fn)

    out_dir = effective["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for mdict, summary, result in zip(effective["methods"], report.summaries,
                                      report.results):
        sub = os.path.join(out_dir, f"method_{summary.label}")
        code, reason = _evaluate_run(task, result)
        sub_effective = dict(effective)
        sub_effective.pop("methods")
        sub_effective["method"] = mdict
        _emit_run_artifacts(sub, task, result, sub_effective, digest, code, reason)
        rows.append((summary, code, reason))

    comparison_csv = os.path.join(out_dir, "comparison.csv")
    with open(comparison_csv, "w", newline="") as fh:
        fh.write(f"# config_hash={digest}\n")
        writer = csv.writer(fh)
        writer.writerow(["iteration"] + [
            f"{label}_{col}" for label in report.labels
            for col in ("violation_l2", "cost")
        ])
        n_rows = max(r.metrics.iteration.size for r in report.results)
        for i in range(n_rows):
            row: list = [i]
            for res in report.results:
                m = res.metrics
                if i < m.iteration.size:
                    row += [m.violation_l2[i], m.cost[i]]
                else:
                    row += ["", ""]
            writer.writerow(row)

    summary_json = {
        "config_hash": digest,
        "effective_config": effective,
        "task": effective["task"],
        "methods": [
            {**s.as_dict(), "exit": {"code": code, "reason": reason}}
            for s, code, reason in rows
        ],
    }
    with open(os.path.join(out_dir, "comparison_summary.json"), "w") as fh:
        json.dump(summary_json, fh, indent=2)
    if not quiet:
        print(f"[{effective['task']}] comparison of {len(rows)} methods:")
        for s, code, reason in rows:
            print(f"  {s.label}: violation_mean={s.violation_mean:.4g} "
                  f"avg_ms={s.avg_solve_ms:.1f} exit={code} ({reason})")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="slqmpc",
        description="Constrained SLQ-MPC benchmark runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run a single method on a task"),
                           ("compare", "run several methods on the same task")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="path to a JSON experiment config")
        p.add_argument("--output-dir", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run_experiment(args.config, args.output_dir, args.seed, args.quiet)
    return run_comparison(args.config, args.output_dir, args.seed, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
