"""Deterministic scripted negotiators for tests, screening probes, and demos.

The zoo covers every termination path and metric edge: walking away, accepting
anything feasible, conceding linearly on one issue, truthfully restating a
BATNA forever (round-limit filler), and violating a hard cap. Bots are pure
functions of (view, params): identical views yield identical messages.
"""

from __future__ import annotations

import json
from typing import Any, Callable

from ..protocol import DEAL_FAILED, DEAL_MISUNDERSTANDING, DEAL_REACHED, is_valuation_key, terms_to_outcome
from ..scenarios import Scenario, check_feasibility, evaluate_utility, is_veto, zopa_probe
from . import SideView

VALUE_KEY = "total_value_of_deal_to_me"


def default_terms(scenario: Scenario) -> dict[str, Any]:
    """A full assignment using each issue's most conservative value."""
    terms: dict[str, Any] = {}
    for issue in scenario.issues:
        if issue.kind == "categorical":
            terms[issue.name] = issue.options[0]
        elif issue.kind == "boolean":
            terms[issue.name] = True
        elif issue.kind == "continuous":
            terms[issue.name] = float(issue.lower)
        else:
            terms[issue.name] = float(issue.bonus_lower)
    return terms


def _own_value(view: SideView, terms: dict[str, Any]) -> float | None:
    outcome = terms_to_outcome(view.scenario, terms)
    if outcome is None:
        return None
    value = evaluate_utility(view.scenario, view.role, outcome)
    return None if is_veto(value) else value


def _with_valuation(view: SideView, terms: dict[str, Any], report_value) -> dict[str, Any]:
    if report_value is None:
        return terms
    value = _own_value(view, terms)
    if value is None:
        return terms
    offset = 0.0 if report_value in (True, "exact") else float(report_value)
    return {**terms, VALUE_KEY: value + offset}


def _proposal_text(terms: dict[str, Any], sloppy: bool = False) -> str:
    if sloppy:
        # repairable but not strictly valid: single quotes and a trailing comma
        inner = ", ".join(f"'{k}': {json.dumps(v)}" for k, v in terms.items())
        return f"{DEAL_REACHED} {{{inner},}}"
    return f"{DEAL_REACHED} {json.dumps(terms)}"


def _confirm_text(view: SideView, pending: dict[str, Any], report_value) -> str:
    terms = {k: v for k, v in pending.items() if not is_valuation_key(k)}
    return _proposal_text(_with_valuation(view, terms, report_value))


def _pending_feasible(view: SideView) -> bool | None:
    """None: no pending proposal. Otherwise whether it maps to a feasible outcome."""
    if view.pending_terms is None:
        return None
    outcome = terms_to_outcome(view.scenario, view.pending_terms)
    if outcome is None:
        return False
    return check_feasibility(view.scenario, outcome).feasible


class WalkAwayBot:
    """Declares no deal possible on its first opportunity."""

    def __init__(self, params: dict):
        pass

    def next_message(self, view: SideView) -> str:
        return DEAL_FAILED


class AcceptAnythingBot:
    """Confirms any feasible pending proposal; flags infeasible ones as mismatch.

    With nothing pending it proposes the conservative default package, so two
    of these paired together close a deal immediately (even in scenarios with
    no bargaining zone). params: report_value — None, "exact", or a numeric
    offset added to the truthful self-valuation.
    """

    def __init__(self, params: dict):
        self.report_value = params.get("report_value")

    def next_message(self, view: SideView) -> str:
        feasible = _pending_feasible(view)
        if feasible is None:
            package = default_terms(view.scenario)
            return _proposal_text(_with_valuation(view, package, self.report_value))
        if feasible:
            return _confirm_text(view, view.pending_terms, self.report_value)
        return DEAL_MISUNDERSTANDING


class LinearConcessionBot:
    """Concedes linearly on one issue from `start` to `floor` across the horizon.

    At major round r of R the target is start - (r-1) * (start-floor) / (R-1).
    Accepts a pending feasible proposal worth at least its current target
    package. params: issue (falls back to the first bounded issue when absent
    from the scenario), start, floor, rounds (default view round limit),
    fixed_terms for the remaining issues, report_value, sloppy_json,
    walk_if_no_zopa (declare no deal when no outcome beats both BATNAs).
    """

    def __init__(self, params: dict):
        self.issue = params["issue"]
        self.start = float(params["start"])
        self.floor = float(params["floor"])
        self.rounds = params.get("rounds")
        self.fixed_terms = dict(params.get("fixed_terms", {}))
        self.report_value = params.get("report_value")
        self.sloppy_json = bool(params.get("sloppy_json", False))
        self.walk_if_no_zopa = bool(params.get("walk_if_no_zopa", False))

    def target(self, major_round: int, rounds: int) -> float:
        if rounds <= 1:
            return self.floor
        step = (self.start - self.floor) / (rounds - 1)
        return self.start - (major_round - 1) * step

    def _package(self, view: SideView, major_round: int) -> dict[str, Any]:
        rounds = int(self.rounds or view.round_limit)
        issue = self.issue
        if issue not in view.scenario.issue_names():
            issue = next(i.name for i in view.scenario.issues if i.bounds() is not None)
        terms = {**default_terms(view.scenario), **self.fixed_terms}
        terms = {k: v for k, v in terms.items() if k in view.scenario.issue_names()}
        terms[issue] = self.target(min(major_round, rounds), rounds)
        return terms

    def next_message(self, view: SideView) -> str:
        if self.walk_if_no_zopa and zopa_probe(view.scenario).empty:
            return DEAL_FAILED
        package = self._package(view, view.major_round)
        if _pending_feasible(view):
            own_target_value = _own_value(view, package)
            pending_value = _own_value(view, {
                k: v for k, v in view.pending_terms.items() if not is_valuation_key(k)})
            if pending_value is not None and own_target_value is not None \
                    and pending_value >= own_target_value:
                return _confirm_text(view, view.pending_terms, self.report_value)
        return _proposal_text(_with_valuation(view, package, self.report_value), self.sloppy_json)


class BatnaTruthfulBot:
    """Restates its true walk-away value every turn; never proposes or accepts."""

    def __init__(self, params: dict):
        pass

    def next_message(self, view: SideView) -> str:
        batna = view.scenario.role(view.role).batna
        return (
            f"To be transparent: my walk-away value is {batna:g} points. "
            "I will only sign something strictly better than that."
        )


class CapViolatingBot:
    """Proposes a package that breaches a hard cap; confirms anything pending.

    Paired with itself this produces confirmed deals that fail constraint
    compliance. params: issue (default: first bounded issue), margin (how far
    past the cap to go), report_value.
    """

    def __init__(self, params: dict):
        self.issue = params.get("issue")
        self.margin = float(params.get("margin", 10.0))
        self.report_value = params.get("report_value")

    def _violating_package(self, scenario: Scenario) -> dict[str, Any]:
        terms = default_terms(scenario)
        name = self.issue
        if name is None or name not in scenario.issue_names():
            name = next(i.name for i in scenario.issues if i.bounds() is not None)
        spec = scenario.issue(name)
        lo, hi = spec.bounds()
        terms[name] = hi + self.margin
        return terms

    def next_message(self, view: SideView) -> str:
        if view.pending_terms is not None:
            return _confirm_text(view, view.pending_terms, self.report_value)
        return _proposal_text(_with_valuation(view, self._violating_package(view.scenario),
                                              self.report_value))


SCRIPTED_BOTS: dict[str, Callable[[dict], Any]] = {
    "walk_away": WalkAwayBot,
    "accept_anything": AcceptAnythingBot,
    "linear_concession": LinearConcessionBot,
    "batna_truthful": BatnaTruthfulBot,
    "cap_violating": CapViolatingBot,
}


def make_scripted_agent(name: str, params: dict):
    try:
        factory = SCRIPTED_BOTS[name]
    except KeyError:
        raise ValueError(f"unknown scripted bot {name!r}; have {sorted(SCRIPTED_BOTS)}") from None
    return factory(params or {})
