"""Command-line interface: ``ctql {train,evaluate,robustness,report}``."""
from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, _jit
from .config import ConfigError, load_config
from .experiment import (
    STREAM_EVAL,
    compare,
    evaluate_policy,
    learning_curves,
    run_robustness,
    run_sessions,
    session_metrics,
    stream_rng,
)
from .storage import (
    EPISODE_FIELDS,
    EVALUATION_FIELDS,
    GRIDS,
    ROBUSTNESS_FIELDS,
    QTableError,
    episode_rows,
    qtable_filename,
    read_episodes,
    read_evaluations,
    read_json,
    read_qtable,
    write_csv,
    write_json,
    write_qtable,
)

log = logging.getLogger("ctql")

DEFAULT_OUT_DIR = "ctql-run"

# Interpretation choices baked into the metrics and algorithms; recorded in
# every manifest so a reader knows which variant produced the numbers.
REPAIRS = {
    "gym_reward_negated": True,
    "avg_reward_after_terminal_mean_over_tail": True,
    "steady_state_error_distance_to_goal": True,
    "terminal_streak_inclusive_31": True,
    "learning_rate_episode_1_indexed": True,
    "evaluation_frozen_greedy": True,
    "linear_model_as_printed": True,
    "tutor_observes_quantized_state": True,
}


class CliError(Exception):
    pass


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get("CTQL_OUT_DIR") or DEFAULT_OUT_DIR)


def _load(args, config_path=None):
    overrides = {
        "seed": args.seed,
        "reward": args.reward,
        "algorithms": args.algorithms,
        "episodes": getattr(args, "episodes", None),
        "sessions": getattr(args, "sessions", None),
        "unsafe": True if getattr(args, "unsafe", False) else None,
    }
    return load_config(args.config or config_path, overrides)


def _manifest(cfg, command, started):
    return {
        "tool": "ctql",
        "version": __version__,
        "command": command,
        "config": cfg.values,
        "seed": cfg.plan.seed,
        "grids": {name: {"levels": g.levels.tolist(), "sha256": g.checksum()} for name, g in GRIDS.items()},
        "repairs": REPAIRS,
        "numba": _jit.USE_NUMBA,
        "started": started,
        "finished": None,
    }


def _algorithm_meta(plan):
    return {
        cfg.label: {"kind": cfg.kind, "beta": cfg.beta, "omega": cfg.omega}
        for cfg in plan.algorithms
    }


def build_summary(plan, logs: dict, evaluations: dict) -> dict:
    """Summary JSON body from ``{(label, session): SessionLog}`` and matching evaluations."""
    per_session = {}
    for key in sorted(logs):
        per_session.setdefault(key[0], []).append(session_metrics(logs[key], evaluations[key]))
    order = [cfg.label for cfg in plan.algorithms if cfg.label in per_session]
    order += sorted(set(per_session) - set(order))
    report = compare({label: per_session[label] for label in order})
    return {
        "reward": plan.reward,
        "seed": plan.seed,
        "sessions": plan.sessions,
        "episodes": plan.episodes,
        "horizon": plan.horizon,
        "algorithms": {k: v for k, v in _algorithm_meta(plan).items() if k in per_session},
        **report.to_dict(),
    }


def cmd_train(args) -> int:
    cfg = _load(args)
    plan = cfg.plan
    out = _out_dir(args)
    (out / "qtables").mkdir(parents=True, exist_ok=True)
    manifest = _manifest(cfg, "train", _now())
    write_json(out / "manifest.json", manifest)

    def progress(res):
        log.info("%s session %d: E_t=%s, J_avg=%.2f", res.label, res.session,
                 res.log.terminal_episode(), res.log.avg_cumulative_reward())

    results = run_sessions(plan, args.parallelism, progress)
    betas = {c.label: c.beta for c in plan.algorithms}

    def ep_rows():
        for res in results:
            yield from episode_rows(res.label, betas[res.label], plan.reward, res.session, res.log)

    write_csv(out / "episodes.csv", EPISODE_FIELDS, ep_rows())
    write_csv(out / "evaluation.csv", EVALUATION_FIELDS, (
        (r.label, betas[r.label], plan.reward, r.session, r.evaluation.goal_met,
         r.evaluation.settling_time, r.evaluation.steady_state_error, r.evaluation.cumulative_reward)
        for r in results
    ))
    for res in results:
        write_qtable(out / "qtables" / qtable_filename(res.label, res.session), res.qtable)
    logs = {(r.label, r.session): r.log for r in results}
    evals = {(r.label, r.session): r.evaluation for r in results}
    write_json(out / "summary.json", build_summary(plan, logs, evals))
    manifest["finished"] = _now()
    write_json(out / "manifest.json", manifest)
    log.info("wrote %s", out)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    plan = cfg.plan
    try:
        algo = cfg.algorithm(args.algorithm)
    except KeyError:
        raise CliError(f"algorithm {args.algorithm!r} is not part of the configured plan") from None
    q = read_qtable(args.qtable)
    rng = stream_rng(plan.seed, algo.label, algo.reward, 0, STREAM_EVAL)
    rec = evaluate_policy(algo, q, plan.env, plan.x0, plan.horizon, rng, plan.goal, plan.integrator).record
    result = {
        "algorithm": algo.label,
        "qtable": str(args.qtable),
        "goal_met": int(rec.goal_met),
        "settling_time": rec.settling_time,
        "steady_state_error": rec.steady_state_error,
        "cumulative_reward": rec.cumulative_reward,
    }
    if args.out_dir:
        out = _out_dir(args)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "evaluate.json", result)
    if args.print_json:
        print(json.dumps(result, indent=2))
    else:
        print(f"{algo.label}: goal_met={result['goal_met']} settling_time={rec.settling_time} "
              f"steady_state_error={rec.steady_state_error}")
    return 0


def cmd_robustness(args) -> int:
    run_dir = _out_dir(args)
    manifest_path = run_dir / "manifest.json"
    if args.config is None and not manifest_path.exists():
        raise CliError(f"{run_dir} has no manifest.json; run `ctql train` first or pass --config")
    cfg = _load(args, manifest_path)
    plan, rplan = cfg.plan, cfg.robustness
    learned = {}
    for algo in plan.algorithms:
        paths = [run_dir / "qtables" / qtable_filename(algo.label, s) for s in range(plan.sessions)]
        missing = [p for p in paths if not p.exists()]
        if missing:
            raise CliError(f"missing Q-table snapshot {missing[0]}")
        learned[algo.label] = [read_qtable(p) for p in paths]
    result = run_robustness(rplan, learned, plan.algorithms, plan)
    rows = []
    for algo in plan.algorithms:
        k = result.settling_time[algo.label]
        err = result.steady_state_error[algo.label]
        for i, (a0, v0, mf, lf) in enumerate(result.setups):
            met = k[i] >= 0
            rows.append((algo.label, algo.beta, plan.reward, i, a0, v0, mf, lf, met,
                         int(k[i]) if met else None, float(err[i]) if met else None))
    write_csv(run_dir / "robustness.csv", ROBUSTNESS_FIELDS, rows)

    summary = {"reward": plan.reward, "setups": rplan.num_setups, "seed": rplan.seed, "algorithms": {}}
    nominal = read_json(run_dir / "summary.json")["stats"] if (run_dir / "summary.json").exists() else {}
    for label, entry in result.summary().items():
        mean, std = entry["steady_state_error"]
        nom = nominal.get(label, {}).get("steady_state_error", {}).get("mean")
        summary["algorithms"][label] = {
            "goal_met": entry["goal_met"],
            "settling_time": {"mean": entry["settling_time"][0], "std": entry["settling_time"][1]},
            "steady_state_error": {"mean": mean, "std": std},
            "nominal_steady_state_error": nom,
            "within_two_std_of_nominal": None if nom is None or mean is None else abs(mean - nom) <= 2 * std,
        }
    write_json(run_dir / "robustness_summary.json", summary)
    log.info("wrote %s", run_dir / "robustness.csv")
    return 0


def cmd_report(args) -> int:
    run_dir = _out_dir(args)
    for name in ("episodes.csv", "evaluation.csv", "manifest.json"):
        if not (run_dir / name).exists():
            raise CliError(f"missing {run_dir / name}")
    cfg = _load(args, run_dir / "manifest.json")
    logs = read_episodes(run_dir / "episodes.csv")
    evals = read_evaluations(run_dir / "evaluation.csv")
    if set(logs) != set(evals):
        raise CliError("episodes.csv and evaluation.csv cover different sessions")
    write_json(run_dir / "report.json", build_summary(cfg.plan, logs, evals))

    by_label = {}
    for (label, _), slog in logs.items():
        by_label.setdefault(label, []).append(slog)
    rows = []
    for label, slogs in by_label.items():
        curves = learning_curves(slogs, args.window)
        for e in range(len(slogs[0])):
            rows.append((label, e + 1, curves["reward_mean"][e], curves["reward_std"][e],
                         curves["tutor_mean"][e], curves["tutor_std"][e]))
    write_csv(run_dir / "curves.csv",
              ("algorithm", "episode", "reward_mean", "reward_std", "tutor_fraction_mean", "tutor_fraction_std"),
              rows)
    log.info("wrote %s and %s", run_dir / "report.json", run_dir / "curves.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration or run manifest")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out-dir", help=f"output/run directory (env CTQL_OUT_DIR, default {DEFAULT_OUT_DIR})")
    common.add_argument("--algorithms", help="comma list, e.g. QL,CTQL,pCTQL or pCTQL:0.9897")
    common.add_argument("--reward", choices=("distance", "gym"))
    common.add_argument("--parallelism", type=int, default=1, help="max concurrent sessions")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ctql", description="Control-tutored Q-learning benchmark")
    parser.add_argument("--version", action="version", version=f"ctql {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="run the learning benchmark")
    p.add_argument("--episodes", type=int)
    p.add_argument("--sessions", type=int)
    p.add_argument("--unsafe", action="store_true", help="allow CTQL with the gym reward")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="nominal control metrics of a Q-table snapshot")
    p.add_argument("--qtable", required=True)
    p.add_argument("--algorithm", default="QL", help="label of the policy the table belongs to")
    p.add_argument("--json", dest="print_json", action="store_true", help="print JSON instead of text")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("robustness", parents=[common], help="perturbed-conditions sweep over a trained run")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("report", parents=[common], help="recompute summaries and learning curves from CSVs")
    p.add_argument("--window", type=int, default=100, help="moving-average window")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.parallelism < 1:
        parser.error("--parallelism must be >= 1")
    try:
        return args.func(args)
    except (ConfigError, QTableError, CliError, OSError, ValueError) as exc:
        print(f"ctql: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
