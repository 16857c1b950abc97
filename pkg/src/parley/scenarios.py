"""Negotiation scenarios: outcome space, utilities, feasibility, and the surplus calculus.

A scenario defines two roles, an ordered list of negotiable issues, optional
cross-issue constraints, and per-role utility rules. Utilities are
additive-linear over issues plus a per-role constant; contingent issues are
valued at belief * bonus. Hard constraints are encoded as deal-breakers whose
utility is a distinguished veto sentinel (never a floating-point infinity).

The derived quantities:

* surplus      s_i = u_i(outcome) - batna_i
* total pie    P   = sum_i s_i
* pie share    p_i = s_i / P          (defined only when P > 0)

Continuous issues carry an explicit enumeration step so the outcome space is
finitely enumerable for the pie-maximum and bargaining-zone probes; proposals
may still use off-grid values, which scoring accepts if within bounds.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterator

SCHEMA_VERSION = 1

#: numeric tolerance used when comparing recomputed pie maxima and share sums
PIE_TOL = 1e-9


class ScenarioError(ValueError):
    """Malformed scenario definition."""


class UnknownIssueError(KeyError):
    """Outcome references an issue the scenario does not define."""


class UnknownOptionError(ValueError):
    """Categorical assignment is not one of the issue's options."""


class InfeasibleOutcomeError(ValueError):
    """Operation requires a feasible outcome but got an infeasible one."""


class EmptyFeasibleSetError(ValueError):
    """Every enumerable outcome is vetoed; the pie maximum is undefined."""


class SingleIssueScenarioError(ValueError):
    """Multi-issue trade test invoked on a scenario with fewer than two issues."""


class _Veto:
    """Distinguished minus-infinity sentinel for deal-breaker outcomes.

    Deliberately supports no arithmetic: any code path that would compute with
    it must treat the outcome as infeasible instead.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "VETO"

    def __bool__(self) -> bool:
        return False


VETO = _Veto()


def is_veto(value) -> bool:
    return value is VETO


@dataclass(frozen=True)
class DealBreaker:
    """Forbidden value set for one issue, from one role's perspective."""

    issue: str
    values: tuple = ()
    forbidden_range: tuple[float, float] | None = None

    def matches(self, value) -> bool:
        for v in self.values:
            if _values_equal(v, value):
                return True
        if self.forbidden_range is not None and isinstance(value, (int, float)):
            lo, hi = self.forbidden_range
            if lo <= float(value) <= hi:
                return True
        return False


@dataclass(frozen=True)
class RoleSpec:
    name: str
    base_value: float = 0.0
    batna: float = 0.0
    deal_breakers: tuple[DealBreaker, ...] = ()


@dataclass(frozen=True)
class IssueSpec:
    """One negotiable issue plus each role's value rule for it.

    kind / rule shape per role:

    * ``categorical``: ``options`` required; rule is an option -> points map.
    * ``continuous``: ``lower``/``upper``/``step`` required; rule is a points-per-unit
      coefficient.
    * ``boolean``: rule is a ``{"true": pts, "false": pts}`` pair.
    * ``contingent``: a negotiated bonus in [bonus_lower, bonus_upper] paid only on
      an uncertain event; rule is ``{"belief": p, "coeff": c, "linear": l}`` and the
      contribution is ``p * c * bonus + l * bonus`` (the linear part is the
      belief-independent upfront term; coeff defaults to 1, linear to 0).
    """

    name: str
    kind: str
    values: dict[str, Any]
    options: tuple[str, ...] = ()
    lower: float | None = None
    upper: float | None = None
    step: float | None = None
    bonus_lower: float | None = None
    bonus_upper: float | None = None

    def bounds(self) -> tuple[float, float] | None:
        if self.kind == "continuous":
            return (float(self.lower), float(self.upper))
        if self.kind == "contingent":
            return (float(self.bonus_lower), float(self.bonus_upper))
        return None


@dataclass(frozen=True)
class CrossIssueConstraint:
    """Implication constraint: if `if_issue` takes `if_value`, `then_issue` must be allowed.

    `allowed_values` and/or `allowed_range` describe the permitted set for
    `then_issue` when the antecedent holds.
    """

    description: str
    if_issue: str
    if_value: Any
    then_issue: str
    allowed_values: tuple = ()
    allowed_range: tuple[float, float] | None = None

    def permits(self, value) -> bool:
        for v in self.allowed_values:
            if _values_equal(v, value):
                return True
        if self.allowed_range is not None and isinstance(value, (int, float)):
            lo, hi = self.allowed_range
            if lo <= float(value) <= hi:
                return True
        return False


@dataclass(frozen=True)
class Outcome:
    """A complete assignment of every scenario issue to a value."""

    assignments: dict[str, Any]

    def get(self, issue: str):
        return self.assignments.get(issue)

    def differing_issues(self, other: "Outcome") -> list[str]:
        names = set(self.assignments) | set(other.assignments)
        return [n for n in sorted(names)
                if not _values_equal(self.assignments.get(n), other.assignments.get(n))]


@dataclass(frozen=True)
class Violation:
    kind: str  # "missing" | "unknown-issue" | "bounds" | "option" | "cross-issue" | "deal-breaker"
    issue: str
    detail: str


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    violations: tuple[Violation, ...] = ()


@dataclass(frozen=True)
class PieResult:
    """Per-role utilities/surpluses plus joint pie. Shares absent when P <= 0."""

    utilities: dict[str, float]
    surpluses: dict[str, float]
    total_pie: float
    shares: dict[str, float] | None


@dataclass(frozen=True)
class ZopaStatus:
    empty: bool
    witness: Outcome | None = None


@dataclass
class Scenario:
    id: str
    roles: tuple[RoleSpec, RoleSpec]
    issues: tuple[IssueSpec, ...]
    constraints: tuple[CrossIssueConstraint, ...] = ()
    round_limit: int = 6
    max_total_pie: float | None = None

    def __post_init__(self):
        self._validate()

    # -- lookups ---------------------------------------------------------

    def role(self, name: str) -> RoleSpec:
        for r in self.roles:
            if r.name == name:
                return r
        raise ScenarioError(f"scenario {self.id!r} has no role {name!r}")

    def role_names(self) -> tuple[str, str]:
        return (self.roles[0].name, self.roles[1].name)

    def issue(self, name: str) -> IssueSpec:
        for spec in self.issues:
            if spec.name == name:
                return spec
        raise UnknownIssueError(name)

    def issue_names(self) -> list[str]:
        return [spec.name for spec in self.issues]

    def is_multi_issue(self) -> bool:
        return len(self.issues) >= 2

    # -- validation ------------------------------------------------------

    def _validate(self) -> None:
        if len(self.roles) != 2:
            raise ScenarioError("a scenario has exactly two roles")
        if self.round_limit < 1:
            raise ScenarioError("round_limit must be positive")
        names = self.issue_names()
        if len(set(names)) != len(names):
            raise ScenarioError("duplicate issue names")
        for spec in self.issues:
            self._validate_issue(spec)
        for c in self.constraints:
            if c.if_issue not in names or c.then_issue not in names:
                raise ScenarioError(f"constraint {c.description!r} references unknown issues")
        for r in self.roles:
            for db in r.deal_breakers:
                if db.issue not in names:
                    raise ScenarioError(f"deal-breaker of {r.name!r} references unknown issue {db.issue!r}")

    def _validate_issue(self, spec: IssueSpec) -> None:
        if spec.kind == "categorical":
            if not spec.options:
                raise ScenarioError(f"categorical issue {spec.name!r} needs at least one option")
        elif spec.kind == "continuous":
            if spec.lower is None or spec.upper is None or spec.lower > spec.upper:
                raise ScenarioError(f"continuous issue {spec.name!r} needs lower <= upper")
            if spec.step is not None and spec.step <= 0:
                raise ScenarioError(f"issue {spec.name!r} step must be positive")
        elif spec.kind == "contingent":
            if spec.bonus_lower is None or spec.bonus_upper is None or spec.bonus_lower > spec.bonus_upper:
                raise ScenarioError(f"contingent issue {spec.name!r} needs bonus_lower <= bonus_upper")
            if spec.step is not None and spec.step <= 0:
                raise ScenarioError(f"issue {spec.name!r} step must be positive")
        elif spec.kind != "boolean":
            raise ScenarioError(f"unknown issue kind {spec.kind!r}")
        for role in self.roles:
            if role.name not in spec.values:
                raise ScenarioError(f"issue {spec.name!r} has no value rule for role {role.name!r}")
            if spec.kind == "contingent":
                belief = float(spec.values[role.name].get("belief", -1))
                if not 0.0 <= belief <= 1.0:
                    raise ScenarioError(f"belief for {role.name!r} on {spec.name!r} must be in [0, 1]")


def _values_equal(a, b, tol: float = 1e-9) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return a is b or a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return math.isclose(float(a), float(b), rel_tol=0.0, abs_tol=tol)
    if isinstance(a, str) and isinstance(b, str):
        return a.strip().casefold() == b.strip().casefold()
    return a == b


# ---------------------------------------------------------------------------
# utility evaluation


def evaluate_utility(scenario: Scenario, role: str, outcome: Outcome):
    """Total utility of `outcome` for `role`, or the VETO sentinel.

    Returns base_value plus the sum of per-issue contributions. Returns VETO
    iff a deal-breaker predicate of that role matches; callers must not do
    arithmetic with the sentinel.

    Raises UnknownIssueError / UnknownOptionError on malformed outcomes.
    """
    spec_role = scenario.role(role)
    for name in outcome.assignments:
        scenario.issue(name)  # raises UnknownIssueError
    total = float(spec_role.base_value)
    for issue in scenario.issues:
        if issue.name not in outcome.assignments:
            raise UnknownIssueError(f"outcome does not assign issue {issue.name!r}")
        value = outcome.assignments[issue.name]
        total += _issue_contribution(issue, issue.values[role], value)
    for db in spec_role.deal_breakers:
        if db.matches(outcome.assignments[db.issue]):
            return VETO
    return total


def _issue_contribution(issue: IssueSpec, rule, value) -> float:
    if issue.kind == "categorical":
        option = _match_option(issue, value)
        return float(rule[option])
    if issue.kind == "continuous":
        return float(rule) * float(value)
    if issue.kind == "boolean":
        key = "true" if _as_bool(value) else "false"
        return float(rule[key])
    # contingent: belief-weighted bonus plus belief-independent linear term
    bonus = float(value)
    belief = float(rule["belief"])
    coeff = float(rule.get("coeff", 1.0))
    linear = float(rule.get("linear", 0.0))
    return belief * coeff * bonus + linear * bonus


def _match_option(issue: IssueSpec, value) -> str:
    if not isinstance(value, str):
        raise UnknownOptionError(f"{issue.name!r} expects one of {issue.options}, got {value!r}")
    wanted = value.strip().casefold()
    for option in issue.options:
        if option.strip().casefold() == wanted:
            return option
    raise UnknownOptionError(f"{value!r} is not an option of issue {issue.name!r}")


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().casefold()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
    if isinstance(value, (int, float)) and float(value) in (0.0, 1.0):
        return bool(value)
    raise UnknownOptionError(f"cannot interpret {value!r} as boolean")


# ---------------------------------------------------------------------------
# feasibility


def check_feasibility(scenario: Scenario, outcome: Outcome) -> FeasibilityVerdict:
    """Bounds, option membership, cross-issue implications, and deal-breakers.

    Never raises; problems are reported as violations in the verdict.
    """
    violations: list[Violation] = []
    known = set(scenario.issue_names())
    for name in outcome.assignments:
        if name not in known:
            violations.append(Violation("unknown-issue", name, "not a scenario issue"))
    for issue in scenario.issues:
        if issue.name not in outcome.assignments:
            violations.append(Violation("missing", issue.name, "no assignment"))
            continue
        value = outcome.assignments[issue.name]
        violations.extend(_value_violations(issue, value))
    for constraint in scenario.constraints:
        antecedent = outcome.assignments.get(constraint.if_issue)
        consequent = outcome.assignments.get(constraint.then_issue)
        if antecedent is None or consequent is None:
            continue
        if _values_equal(antecedent, constraint.if_value) and not constraint.permits(consequent):
            violations.append(Violation("cross-issue", constraint.then_issue, constraint.description))
    if not violations:
        for role in scenario.roles:
            for db in role.deal_breakers:
                if db.matches(outcome.assignments[db.issue]):
                    violations.append(
                        Violation("deal-breaker", db.issue, f"vetoed by role {role.name!r}"))
    return FeasibilityVerdict(feasible=not violations, violations=tuple(violations))


def _value_violations(issue: IssueSpec, value) -> list[Violation]:
    if issue.kind == "categorical":
        try:
            _match_option(issue, value)
        except UnknownOptionError as exc:
            return [Violation("option", issue.name, str(exc))]
        return []
    if issue.kind == "boolean":
        try:
            _as_bool(value)
        except UnknownOptionError as exc:
            return [Violation("option", issue.name, str(exc))]
        return []
    lo, hi = issue.bounds()
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        return [Violation("bounds", issue.name, f"expected a number, got {value!r}")]
    if not (lo - PIE_TOL) <= float(value) <= (hi + PIE_TOL):
        return [Violation("bounds", issue.name, f"{value} outside [{lo}, {hi}]")]
    return []


# ---------------------------------------------------------------------------
# pie calculus


def compute_pie(scenario: Scenario, outcome: Outcome) -> PieResult:
    """Utilities, surpluses, total pie, and (when P > 0) pie shares.

    Raises InfeasibleOutcomeError unless check_feasibility passes.
    """
    verdict = check_feasibility(scenario, outcome)
    if not verdict.feasible:
        raise InfeasibleOutcomeError(
            f"infeasible outcome for {scenario.id!r}: {[v.kind for v in verdict.violations]}")
    utilities: dict[str, float] = {}
    surpluses: dict[str, float] = {}
    for role in scenario.roles:
        u = evaluate_utility(scenario, role.name, outcome)
        assert not is_veto(u)  # feasibility already excluded deal-breakers
        utilities[role.name] = u
        surpluses[role.name] = u - role.batna
    total = sum(surpluses.values())
    shares = None
    if total > 0:
        shares = {name: s / total for name, s in surpluses.items()}
    return PieResult(utilities=utilities, surpluses=surpluses, total_pie=total, shares=shares)


def enumerate_grid(scenario: Scenario) -> Iterator[Outcome]:
    """All outcomes on the scenario's enumeration grid, in issue order."""
    axes = [_grid_values(issue) for issue in scenario.issues]
    names = scenario.issue_names()
    for combo in itertools.product(*axes):
        yield Outcome(dict(zip(names, combo)))


def _grid_values(issue: IssueSpec) -> list:
    if issue.kind == "categorical":
        return list(issue.options)
    if issue.kind == "boolean":
        return [False, True]
    lo, hi = issue.bounds()
    if issue.step is None:
        raise ScenarioError(f"issue {issue.name!r} needs a step for enumeration")
    step = float(issue.step)
    n = int(math.floor((hi - lo) / step + PIE_TOL))
    return [lo + k * step for k in range(n + 1)]


def compute_pstar(scenario: Scenario) -> float:
    """Maximum total pie over the enumerated feasible grid.

    Raises EmptyFeasibleSetError when deal-breakers (or constraints) veto every
    grid point, in which case the maximum is undefined.
    """
    best: float | None = None
    for outcome in enumerate_grid(scenario):
        if not check_feasibility(scenario, outcome).feasible:
            continue
        total = sum(
            evaluate_utility(scenario, role.name, outcome) - role.batna
            for role in scenario.roles
        )
        if best is None or total > best:
            best = total
    if best is None:
        raise EmptyFeasibleSetError(f"scenario {scenario.id!r} has no feasible grid outcome")
    return best


def normalized_total_pie(total_pie: float, pstar: float) -> float:
    return total_pie / pstar


def zopa_probe(scenario: Scenario) -> ZopaStatus:
    """Scan the grid for an outcome strictly better than every BATNA.

    Strict inequality: an outcome where some role is exactly indifferent to
    its BATNA is not a witness.
    """
    for outcome in enumerate_grid(scenario):
        if not check_feasibility(scenario, outcome).feasible:
            continue
        if all(
            evaluate_utility(scenario, role.name, outcome) > role.batna
            for role in scenario.roles
        ):
            return ZopaStatus(empty=False, witness=outcome)
    return ZopaStatus(empty=True)


def pareto_dominates(scenario: Scenario, a: Outcome, b: Outcome) -> bool:
    """True iff `a` is weakly better than `b` for all roles and strictly for some."""
    for outcome in (a, b):
        if not check_feasibility(scenario, outcome).feasible:
            raise InfeasibleOutcomeError("pareto comparison needs feasible outcomes")
    strictly_better = False
    for role in scenario.roles:
        ua = evaluate_utility(scenario, role.name, a)
        ub = evaluate_utility(scenario, role.name, b)
        if ua < ub:
            return False
        if ua > ub:
            strictly_better = True
    return strictly_better


def is_elegant_trade(scenario: Scenario, from_outcome: Outcome, to_outcome: Outcome) -> bool:
    """Pareto improvement changing >= 2 issues with strictly larger total pie."""
    if not scenario.is_multi_issue():
        raise SingleIssueScenarioError(scenario.id)
    if not pareto_dominates(scenario, to_outcome, from_outcome):
        return False
    if len(to_outcome.differing_issues(from_outcome)) < 2:
        return False
    p_from = compute_pie(scenario, from_outcome).total_pie
    p_to = compute_pie(scenario, to_outcome).total_pie
    return p_to > p_from


# ---------------------------------------------------------------------------
# JSON (de)serialization


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": scenario.id,
        "round_limit": scenario.round_limit,
        "roles": [
            {
                "name": r.name,
                "base_value": r.base_value,
                "batna": r.batna,
                "deal_breakers": [
                    {
                        "issue": db.issue,
                        **({"values": list(db.values)} if db.values else {}),
                        **({"range": list(db.forbidden_range)} if db.forbidden_range else {}),
                    }
                    for db in r.deal_breakers
                ],
            }
            for r in scenario.roles
        ],
        "issues": [_issue_to_dict(i) for i in scenario.issues],
        "constraints": [
            {
                "description": c.description,
                "if": {"issue": c.if_issue, "value": c.if_value},
                "then": {
                    "issue": c.then_issue,
                    **({"values": list(c.allowed_values)} if c.allowed_values else {}),
                    **({"range": list(c.allowed_range)} if c.allowed_range else {}),
                },
            }
            for c in scenario.constraints
        ],
        **({"max_total_pie": scenario.max_total_pie} if scenario.max_total_pie is not None else {}),
    }


def _issue_to_dict(issue: IssueSpec) -> dict:
    out: dict[str, Any] = {"name": issue.name, "kind": issue.kind, "values": issue.values}
    if issue.kind == "categorical":
        out["options"] = list(issue.options)
    if issue.kind == "continuous":
        out.update(lower=issue.lower, upper=issue.upper, step=issue.step)
    if issue.kind == "contingent":
        out.update(bonus_lower=issue.bonus_lower, bonus_upper=issue.bonus_upper)
        if issue.step is not None:
            out["step"] = issue.step
    return out


def scenario_from_dict(data: dict) -> Scenario:
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported scenario schema_version {data.get('schema_version')!r}")
    roles = tuple(
        RoleSpec(
            name=r["name"],
            base_value=float(r.get("base_value", 0.0)),
            batna=float(r.get("batna", 0.0)),
            deal_breakers=tuple(
                DealBreaker(
                    issue=db["issue"],
                    values=tuple(db.get("values", ())),
                    forbidden_range=tuple(db["range"]) if "range" in db else None,
                )
                for db in r.get("deal_breakers", ())
            ),
        )
        for r in data["roles"]
    )
    issues = tuple(
        IssueSpec(
            name=i["name"],
            kind=i["kind"],
            values=i["values"],
            options=tuple(i.get("options", ())),
            lower=i.get("lower"),
            upper=i.get("upper"),
            step=i.get("step"),
            bonus_lower=i.get("bonus_lower"),
            bonus_upper=i.get("bonus_upper"),
        )
        for i in data["issues"]
    )
    constraints = tuple(
        CrossIssueConstraint(
            description=c.get("description", ""),
            if_issue=c["if"]["issue"],
            if_value=c["if"]["value"],
            then_issue=c["then"]["issue"],
            allowed_values=tuple(c["then"].get("values", ())),
            allowed_range=tuple(c["then"]["range"]) if "range" in c["then"] else None,
        )
        for c in data.get("constraints", ())
    )
    return Scenario(
        id=data["id"],
        roles=roles,
        issues=issues,
        constraints=constraints,
        round_limit=int(data.get("round_limit", 6)),
        max_total_pie=data.get("max_total_pie"),
    )


def load_scenario(path: str | Path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=False)
        fh.write("\n")


BUILTIN_SCENARIOS = ("toy-jobs", "toy-price", "toy-license", "toy-nozopa")


def builtin_scenario(name: str) -> Scenario:
    """Load one of the scenarios shipped with the package."""
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(f"no builtin scenario {name!r}; have {BUILTIN_SCENARIOS}")
    ref = resources.files("parley.assets.scenarios").joinpath(f"{name}.json")
    return scenario_from_dict(json.loads(ref.read_text(encoding="utf-8")))
