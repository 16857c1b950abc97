"""Run a small cross-play tournament with the scripted bot zoo.

Builds a mover-symmetrized schedule, executes every episode, extracts the
per-side run-level metrics, and prints a capability-profile style summary.
Also runs the three-stage screening pipeline over the same bots.
"""

from collections import defaultdict

from parley.agents import AgentConfig
from parley.orchestrator import (
    Registry,
    extract_all_metrics,
    make_crossplay_schedule,
    run_schedule,
    screening_pipeline,
)
from parley.scenarios import builtin_scenario

registry = Registry(
    agents={
        "accept": AgentConfig("scripted", "accept_anything", {"report_value": "exact"}),
        "conceder": AgentConfig(
            "scripted", "linear_concession",
            {"issue": "salary", "start": 160, "floor": 130,
             "fixed_terms": {"location": "A", "bonus": 12}, "report_value": "exact"}),
        "prudent": AgentConfig(
            "scripted", "linear_concession",
            {"issue": "salary", "start": 135, "floor": 150,
             "fixed_terms": {"location": "A", "bonus": 10},
             "report_value": "exact", "walk_if_no_zopa": True}),
        "walker": AgentConfig("scripted", "walk_away"),
    },
    scenarios={name: builtin_scenario(name)
               for name in ("toy-jobs", "toy-price", "toy-nozopa")},
)

specs = make_crossplay_schedule(
    sorted(registry.agents), ["toy-jobs"], n=4, seed=7)
print(f"schedule: {len(specs)} episodes "
      f"({len(registry.agents)} players, every ordered pair, 4 repetitions)")

records = run_schedule(specs, registry, parallelism=4)
terminations = defaultdict(int)
for record in records:
    terminations[record.termination] += 1
print(f"terminations: {dict(terminations)}")

rows = extract_all_metrics(records, registry)
by_player = defaultdict(list)
for row in rows:
    by_player[row.player].append(row)

print(f"\n{'player':<10} {'deal rate':>9} {'validity':>9} {'batna ok':>9} "
      f"{'accuracy':>9} {'mean share':>11}")
for player, player_rows in sorted(by_player.items()):
    def mean(key):
        values = [getattr(r, key) for r in player_rows if getattr(r, key) is not None]
        return f"{sum(values) / len(values):.3f}" if values else "-"
    print(f"{player:<10} {mean('agreement'):>9} {mean('validity'):>9} "
          f"{mean('batna_compliant'):>9} {mean('accuracy'):>9} {mean('share'):>11}")

print("\nscreening pipeline (no-ZOPA probe + multi-issue probe, 6 runs each):")
for player, result in screening_pipeline(sorted(registry.agents), registry).items():
    failures = sorted(set(result.multiissue_failures)) or ["none"]
    print(f"  {player:<10} api_ok={result.api_ok} "
          f"nozopa={result.nozopa_walkaways}/{result.nozopa_runs} "
          f"multi_issues_failures={failures} -> {'PASS' if result.passed else 'FAIL'}")
