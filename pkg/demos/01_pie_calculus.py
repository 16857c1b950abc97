"""Walk through the surplus/pie calculus on the bundled scenarios.

Covers utilities, feasibility, surpluses, pie shares, the bargaining-zone
probe, Pareto comparisons, integrative ("elegant") trades, and the maximum
achievable pie used for normalization.
"""

from parley.scenarios import (
    Outcome,
    builtin_scenario,
    check_feasibility,
    compute_pie,
    compute_pstar,
    evaluate_utility,
    is_elegant_trade,
    pareto_dominates,
    zopa_probe,
)

jobs = builtin_scenario("toy-jobs")
print(f"scenario {jobs.id}: roles {jobs.role_names()}, issues {jobs.issue_names()}")

outcome = Outcome({"salary": 150, "location": "A", "bonus": 10})
for role in jobs.role_names():
    print(f"  u[{role}] = {evaluate_utility(jobs, role, outcome):g}")

pie = compute_pie(jobs, outcome)
print(f"  surpluses {pie.surpluses} -> total pie {pie.total_pie:g}")
print(f"  shares {({k: round(v, 4) for k, v in pie.shares.items()})}")

pstar = compute_pstar(jobs)
print(f"  max achievable pie P* = {pstar:g}; normalized pie = {pie.total_pie / pstar:.4f}")

# feasibility: hard caps are violations, not crashes
over_cap = Outcome({"salary": 150, "location": "A", "bonus": 400})
verdict = check_feasibility(jobs, over_cap)
print(f"\nbonus 400 feasible? {verdict.feasible}; violations: "
      f"{[(v.kind, v.issue) for v in verdict.violations]}")

# the bargaining zone: strict improvement over both walk-away values
for name in ("toy-price", "toy-nozopa"):
    scenario = builtin_scenario(name)
    status = zopa_probe(scenario)
    witness = status.witness.assignments if status.witness else None
    print(f"{name}: bargaining zone empty? {status.empty} (witness {witness})")

# an integrative trade: both sides gain by moving two issues at once
start = Outcome({"salary": 150, "location": "B", "bonus": 0})
target = Outcome({"salary": 150, "location": "A", "bonus": 12})
print(f"\n{start.assignments} -> {target.assignments}")
print(f"  Pareto improvement? {pareto_dominates(jobs, target, start)}")
print(f"  pie grows {compute_pie(jobs, start).total_pie:g} -> "
      f"{compute_pie(jobs, target).total_pie:g}")
print(f"  elegant trade? {is_elegant_trade(jobs, start, target)}")

# contingent contracting: belief gaps create surplus
license_ = builtin_scenario("toy-license")
deal = Outcome({"upfront": 4, "approval_bonus": 20})
pie = compute_pie(license_, deal)
print(f"\n{license_.id}: upfront 4 + contingent bonus 20 -> surpluses "
      f"{({k: round(v, 2) for k, v in pie.surpluses.items()})}, pie {pie.total_pie:.2f}")
