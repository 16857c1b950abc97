"""Operator CLI: batch experiments, screening, judging, fitting, reports, serving.

Every subcommand reads JSON config/inputs and writes JSON/CSV/JSONL outputs.
Failures exit nonzero with a machine-readable error JSON on stderr. With
--stub-providers all provider-backed policies run against the deterministic
offline stub, so everything here works with no network access.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import defaultdict
from pathlib import Path

from .agents import AgentConfig
from .gateway import HttpProvider, StubProvider
from .orchestrator import (
    ExperimentConfig,
    Registry,
    annotate_episode,
    extract_all_metrics,
    plays_from_records,
    read_episodes_jsonl,
    read_metrics_csv,
    run_schedule,
    screening_pipeline,
    write_episodes_jsonl,
    write_metrics_csv,
)
from .ratings import (
    fit_skill_model,
    read_plays,
    write_leaderboard_csv,
    write_leaderboard_json,
    write_plays,
    write_plot_data,
)


def _provider_factory(stub: bool):
    def factory(config: AgentConfig):
        if config.policy != "llm":
            return None
        if stub:
            return StubProvider(default="Let us keep talking.")
        if config.provider is None:
            raise SystemExit(_error(f"llm player {config.name!r} has no provider config"))
        return HttpProvider(config.provider)

    return factory


def _error(message: str, **extra) -> int:
    payload = {"error": message, **extra}
    print(json.dumps(payload), file=sys.stderr)
    return 1


def _registry(config: ExperimentConfig, stub: bool) -> Registry:
    return Registry(
        agents=config.players,
        scenarios=config.load_scenarios(),
        provider_factory=_provider_factory(stub),
    )


def cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.parallelism is not None:
        config.parallelism = args.parallelism
    registry = _registry(config, args.stub_providers)
    specs = config.schedule()
    records = run_schedule(specs, registry, parallelism=config.parallelism)
    write_episodes_jsonl(records, args.out)
    metrics_path = args.metrics or str(Path(args.out).with_suffix(".metrics.csv"))
    rows = extract_all_metrics(records, registry)
    write_metrics_csv(rows, metrics_path)
    aborted = sum(1 for r in records if r.aborted)
    print(json.dumps({
        "episodes": len(records),
        "aborted": aborted,
        "deal_rate": (sum(r.verified_agreement for r in records if not r.aborted)
                      / max(len(records) - aborted, 1)),
        "episodes_path": str(args.out),
        "metrics_path": metrics_path,
    }, indent=2))
    return 0


def cmd_screen(args) -> int:
    config = ExperimentConfig.load(args.config)
    registry = _registry(config, args.stub_providers)
    for probe in (args.nozopa_probe, args.multiissue_probe):
        if probe not in registry.scenarios:
            from .scenarios import builtin_scenario

            registry.scenarios[probe] = builtin_scenario(probe)
    results = screening_pipeline(
        sorted(config.players),
        registry,
        nozopa_scenario=args.nozopa_probe,
        multiissue_scenario=args.multiissue_probe,
        runs_per_probe=args.runs,
        seed=config.seed,
    )
    payload = {player: result.to_dict() for player, result in results.items()}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    for player, result in results.items():
        print(f"{player}: {'PASS' if result.passed else 'FAIL'} "
              f"(nozopa {result.nozopa_walkaways}/{result.nozopa_runs}, "
              f"multi-issue failures: {sorted(set(result.multiissue_failures)) or 'none'})")
    return 0


def cmd_judge(args) -> int:
    config = ExperimentConfig.load(args.config)
    if config.judge is None and not args.stub_providers:
        return _error("config has no judge provider")
    if args.stub_providers:
        judge = StubProvider(rules=[
            ("detect Negotiation lies",
             '{"side1_lies": [], "side2_lies": [], "side1_lie_count": 0, "side2_lie_count": 0}'),
            ("repeat-business suitability",
             '{"integrity": 50, "reliability": 50, "reciprocity": 50, "collaboration": 50, "conduct": 50}'),
        ])
    else:
        judge = HttpProvider(config.judge.provider)
    registry = _registry(config, args.stub_providers)
    records = read_episodes_jsonl(args.episodes)
    annotated = [
        annotate_episode(record, registry.scenario(record.scenario_id), judge)
        if not record.aborted else record
        for record in records
    ]
    write_episodes_jsonl(annotated, args.out)
    print(json.dumps({"episodes": len(annotated), "out": str(args.out)}, indent=2))
    return 0


def cmd_fit(args) -> int:
    if not args.plays and not args.episodes:
        return _error("fit needs --plays or --episodes")
    plays = read_plays(args.plays) if args.plays else None
    if plays is None:
        records = read_episodes_jsonl(args.episodes)
        plays = plays_from_records(records)
        if args.dump_plays:
            write_plays(plays, args.dump_plays)
    if not plays:
        return _error("no usable plays (need verified deals with positive pie)")
    fit = fit_skill_model(plays, anchor=args.anchor)
    write_leaderboard_json(fit, args.out, level=args.level)
    if args.csv:
        write_leaderboard_csv(fit, args.csv, level=args.level)
    if args.plot_data:
        write_plot_data(fit, args.plot_data, level=args.level)
    with open(args.out, encoding="utf-8") as fh:
        print(fh.read().rstrip())
    return 0


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def cmd_report(args) -> int:
    rows = read_metrics_csv(args.metrics)
    by_player: dict[str, list[dict]] = defaultdict(list)
    for row in rows:
        by_player[row["player"]].append(row)

    def flag(row, key):
        value = row.get(key, "")
        return None if value in ("", "None", None) else float(value)

    profile = {}
    for player, player_rows in sorted(by_player.items()):
        profile[player] = {
            "episodes": len(player_rows),
            "deal_rate": _mean([flag(r, "agreement") for r in player_rows]),
            "validity": _mean([flag(r, "validity") for r in player_rows]),
            "batna_compliance": _mean([flag(r, "batna_compliant") for r in player_rows]),
            "accuracy": _mean([flag(r, "accuracy") for r in player_rows]),
            "lie_rate": _mean([flag(r, "lie_rate") for r in player_rows]),
            "reputation": _mean([flag(r, "reputation") for r in player_rows]),
            "mean_share": _mean([flag(r, "share") for r in player_rows]),
            "mean_normalized_pie": _mean([flag(r, "normalized_pie") for r in player_rows]),
        }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(profile, fh, indent=2)
        fh.write("\n")
    columns = ("deal_rate", "validity", "batna_compliance", "accuracy",
               "lie_rate", "reputation", "mean_share")
    if args.plot_data:
        payload = {
            "players": list(profile),
            "dimensions": list(columns),
            "values": {c: [profile[p][c] for p in profile] for c in columns},
        }
        with open(args.plot_data, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    header = "player".ljust(20) + "".join(c.rjust(18) for c in columns)
    print(header)
    for player, stats in profile.items():
        cells = "".join(
            (f"{stats[c]:.3f}" if stats[c] is not None else "-").rjust(18) for c in columns)
        print(player.ljust(20) + cells)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionStore, create_app

    config = ExperimentConfig.load(args.config)
    store = SessionStore(
        scenarios=config.load_scenarios(),
        agent_configs=config.players,
        provider_factory=_provider_factory(args.stub_providers),
        journal_path=args.journal,
        demographics_path=args.demographics,
        seed=config.seed,
    )
    app = create_app(store)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parley", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment schedule to JSONL + metrics CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--metrics")
    run.add_argument("--seed", type=int)
    run.add_argument("--parallelism", type=int)
    run.add_argument("--stub-providers", action="store_true")
    run.set_defaults(fn=cmd_run)

    screen = sub.add_parser("screen", help="run the screening pipeline over config players")
    screen.add_argument("--config", required=True)
    screen.add_argument("--out", required=True)
    screen.add_argument("--nozopa-probe", default="toy-nozopa")
    screen.add_argument("--multiissue-probe", default="toy-jobs")
    screen.add_argument("--runs", type=int, default=6)
    screen.add_argument("--stub-providers", action="store_true")
    screen.set_defaults(fn=cmd_screen)

    judge = sub.add_parser("judge", help="annotate persisted episodes with judge outputs")
    judge.add_argument("--config", required=True)
    judge.add_argument("--episodes", required=True)
    judge.add_argument("--out", required=True)
    judge.add_argument("--stub-providers", action="store_true")
    judge.set_defaults(fn=cmd_judge)

    fit = sub.add_parser("fit", help="fit the ratings model and write a leaderboard")
    fit.add_argument("--plays", help="plays CSV/JSONL (columns i,j,scenario,first_flag,d)")
    fit.add_argument("--episodes", help="episodes JSONL to extract plays from")
    fit.add_argument("--dump-plays", help="where to save extracted plays")
    fit.add_argument("--anchor", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--csv")
    fit.add_argument("--plot-data")
    fit.add_argument("--level", type=float, default=0.95)
    fit.set_defaults(fn=cmd_fit)

    report = sub.add_parser("report", help="render per-player capability profiles")
    report.add_argument("--metrics", required=True)
    report.add_argument("--out", required=True)
    report.add_argument("--plot-data")
    report.set_defaults(fn=cmd_report)

    serve = sub.add_parser("serve", help="start the live session HTTP API")
    serve.add_argument("--config", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--journal")
    serve.add_argument("--demographics")
    serve.add_argument("--stub-providers", action="store_true")
    serve.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit:
        raise
    except FileNotFoundError as exc:
        return _error(f"file not found: {exc.filename or exc}")
    except Exception as exc:  # surface anything else as machine-readable JSON
        return _error(str(exc), type=type(exc).__name__)


if __name__ == "__main__":
    sys.exit(main())
