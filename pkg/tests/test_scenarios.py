"""Scenario model: utilities, feasibility, and the surplus/pie calculus."""

from __future__ import annotations

import itertools
import math

import pytest

from parley.scenarios import (
    VETO,
    CrossIssueConstraint,
    DealBreaker,
    EmptyFeasibleSetError,
    InfeasibleOutcomeError,
    IssueSpec,
    Outcome,
    RoleSpec,
    Scenario,
    SingleIssueScenarioError,
    UnknownIssueError,
    UnknownOptionError,
    builtin_scenario,
    check_feasibility,
    compute_pie,
    compute_pstar,
    enumerate_grid,
    evaluate_utility,
    is_elegant_trade,
    is_veto,
    pareto_dominates,
    scenario_from_dict,
    scenario_to_dict,
    zopa_probe,
)

JOBS_OUTCOME = Outcome({"salary": 150.0, "location": "A", "bonus": 10.0})


def manual_utility(scenario: Scenario, role: str, outcome: Outcome) -> float:
    """Independent re-summation oracle: hand-applies each rule kind."""
    spec = scenario.role(role)
    total = spec.base_value
    for issue in scenario.issues:
        rule = issue.values[role]
        value = outcome.assignments[issue.name]
        if issue.kind == "categorical":
            total += rule[value]
        elif issue.kind == "continuous":
            total += rule * value
        elif issue.kind == "boolean":
            total += rule["true"] if value else rule["false"]
        else:
            total += (rule["belief"] * rule.get("coeff", 1.0) + rule.get("linear", 0.0)) * value
    return total


class TestEvaluateUtility:
    def test_toy_jobs_hand_summable(self, toy_jobs):
        assert evaluate_utility(toy_jobs, "recruiter", JOBS_OUTCOME) == 68.0
        assert evaluate_utility(toy_jobs, "candidate", JOBS_OUTCOME) == 170.0
        for role in toy_jobs.role_names():
            assert evaluate_utility(toy_jobs, role, JOBS_OUTCOME) == pytest.approx(
                manual_utility(toy_jobs, role, JOBS_OUTCOME))

    def test_deal_breaker_returns_veto(self, toy_license):
        outcome = Outcome({"upfront": 0.0, "approval_bonus": 10.0})
        assert is_veto(evaluate_utility(toy_license, "inventor", outcome))
        assert not is_veto(evaluate_utility(toy_license, "firm", outcome))

    def test_constant_scenario(self):
        scenario = Scenario(
            id="constant",
            roles=(RoleSpec("a", base_value=7.0), RoleSpec("b", base_value=7.0)),
            issues=(IssueSpec("k", "continuous", {"a": 0.0, "b": 0.0},
                              lower=0.0, upper=10.0, step=1.0),),
        )
        for value in (0.0, 3.0, 10.0):
            assert evaluate_utility(scenario, "a", Outcome({"k": value})) == 7.0

    def test_malformed_outcomes(self, toy_jobs):
        with pytest.raises(UnknownIssueError):
            evaluate_utility(toy_jobs, "recruiter", Outcome({"salary": 150.0}))
        with pytest.raises(UnknownIssueError):
            evaluate_utility(toy_jobs, "recruiter",
                             Outcome({**JOBS_OUTCOME.assignments, "ghost": 1}))
        with pytest.raises(UnknownOptionError):
            evaluate_utility(toy_jobs, "recruiter",
                             Outcome({"salary": 150.0, "location": "Z", "bonus": 0.0}))

    def test_contingent_belief_weighting(self, toy_license):
        outcome = Outcome({"upfront": 10.0, "approval_bonus": 20.0})
        assert evaluate_utility(toy_license, "inventor", outcome) == pytest.approx(0.85 * 10 + 0.7 * 20)
        assert evaluate_utility(toy_license, "firm", outcome) == pytest.approx(37 - 10 - 0.3 * 20)


class TestFeasibility:
    def test_bounds_violation(self, toy_jobs):
        verdict = check_feasibility(
            toy_jobs, Outcome({"salary": 250.0, "location": "A", "bonus": 0.0}))
        assert not verdict.feasible
        assert [v.kind for v in verdict.violations] == ["bounds"]

    def test_cross_issue_implication(self, exec_hire):
        base = {
            "base_salary": 150_000.0, "signing_bonus": 10_000.0, "location": "Lakewood",
            "vacation_weeks": 2.0, "mentor_rotation": True,
        }
        bad = check_feasibility(exec_hire, Outcome({**base, "start_date": "Aug 5"}))
        assert not bad.feasible
        assert [v.kind for v in bad.violations] == ["cross-issue"]
        good = check_feasibility(exec_hire, Outcome({**base, "start_date": "Aug 1"}))
        assert good.feasible and good.violations == ()

    def test_conforming_outcome(self, toy_jobs):
        verdict = check_feasibility(toy_jobs, JOBS_OUTCOME)
        assert verdict.feasible and verdict.violations == ()

    def test_deal_breaker_reported(self, toy_license):
        verdict = check_feasibility(toy_license, Outcome({"upfront": 0.0, "approval_bonus": 0.0}))
        assert not verdict.feasible
        assert [v.kind for v in verdict.violations] == ["deal-breaker"]


class TestComputePie:
    def test_paper_fixed_pie_split(self):
        # single-issue constant-sum: seller floor 200k, buyer reservation 400k
        scenario = Scenario(
            id="fixed-pie-sale",
            roles=(RoleSpec("seller", base_value=-200_000.0, batna=0.0),
                   RoleSpec("buyer", base_value=400_000.0, batna=0.0)),
            issues=(IssueSpec("price", "continuous", {"seller": 1.0, "buyer": -1.0},
                              lower=200_000.0, upper=400_000.0, step=1_000.0),),
        )
        pie = compute_pie(scenario, Outcome({"price": 279_449.0}))
        assert pie.surpluses == {"seller": 79_449.0, "buyer": 120_551.0}
        assert pie.total_pie == 200_000.0
        assert pie.shares["seller"] == pytest.approx(0.397245)
        assert pie.shares["buyer"] == pytest.approx(0.602755)

    def test_zero_pie_has_no_shares(self):
        scenario = Scenario(
            id="moot",
            roles=(RoleSpec("a", base_value=5.0, batna=5.0),
                   RoleSpec("b", base_value=5.0, batna=5.0)),
            issues=(IssueSpec("k", "continuous", {"a": 0.0, "b": 0.0},
                              lower=0.0, upper=1.0, step=1.0),),
        )
        pie = compute_pie(scenario, Outcome({"k": 0.0}))
        assert pie.total_pie == 0.0
        assert pie.shares is None

    def test_toy_jobs_arithmetic(self, toy_jobs):
        pie = compute_pie(toy_jobs, JOBS_OUTCOME)
        assert pie.surpluses == {"recruiter": 48.0, "candidate": 60.0}
        assert pie.total_pie == 108.0
        assert pie.shares["recruiter"] == pytest.approx(48 / 108)
        assert pie.shares["candidate"] == pytest.approx(60 / 108)

    def test_infeasible_rejected(self, toy_jobs):
        with pytest.raises(InfeasibleOutcomeError):
            compute_pie(toy_jobs, Outcome({"salary": 999.0, "location": "A", "bonus": 0.0}))


def grid_max_oracle(scenario: Scenario) -> float:
    """Exhaustive enumeration oracle, independent of compute_pstar."""
    best = None
    for outcome in enumerate_grid(scenario):
        if not check_feasibility(scenario, outcome).feasible:
            continue
        total = sum(manual_utility(scenario, r.name, outcome) - r.batna
                    for r in scenario.roles)
        if best is None or total > best:
            best = total
    assert best is not None
    return best


class TestComputePstar:
    def test_categorical_only(self):
        scenario = Scenario(
            id="single-cat",
            roles=(RoleSpec("a"), RoleSpec("b")),
            issues=(IssueSpec("menu", "categorical", options=("x", "y", "z"),
                              values={"a": {"x": 10.0, "y": 30.0, "z": 20.0},
                                      "b": {"x": 0.0, "y": 10.0, "z": 5.0}}),),
        )
        assert compute_pstar(scenario) == 40.0
        assert compute_pstar(scenario) == grid_max_oracle(scenario)

    def test_constant_sum(self, toy_price):
        # for any feasible outcome P equals c - sum(batnas)
        pie = compute_pie(toy_price, Outcome({"price": 137.0}))
        assert pie.total_pie == pytest.approx(30.0)
        assert compute_pstar(toy_price) == pytest.approx(30.0)

    def test_toy_jobs_grid_max(self, toy_jobs):
        pstar = compute_pstar(toy_jobs)
        assert pstar == pytest.approx(grid_max_oracle(toy_jobs))
        assert pstar == pytest.approx(117.0)
        normalized = compute_pie(toy_jobs, JOBS_OUTCOME).total_pie / pstar
        assert normalized == pytest.approx(108.0 / 117.0)

    def test_empty_feasible_set(self):
        scenario = Scenario(
            id="all-vetoed",
            roles=(RoleSpec("a", deal_breakers=(DealBreaker("k", forbidden_range=(0.0, 10.0)),)),
                   RoleSpec("b")),
            issues=(IssueSpec("k", "continuous", {"a": 1.0, "b": 1.0},
                              lower=0.0, upper=10.0, step=1.0),),
        )
        with pytest.raises(EmptyFeasibleSetError):
            compute_pstar(scenario)

    def test_cached_value_matches_recomputation(self):
        for name in ("toy-jobs", "toy-price", "toy-license"):
            scenario = builtin_scenario(name)
            assert scenario.max_total_pie == pytest.approx(compute_pstar(scenario), abs=1e-9)

    def test_enumeration_order_invariance(self, toy_jobs):
        reordered = Scenario(
            id=toy_jobs.id,
            roles=toy_jobs.roles,
            issues=tuple(reversed(toy_jobs.issues)),
            constraints=toy_jobs.constraints,
            round_limit=toy_jobs.round_limit,
        )
        assert compute_pstar(reordered) == pytest.approx(compute_pstar(toy_jobs))


def price_scenario(buyer_reservation: float, seller_floor: float) -> Scenario:
    return Scenario(
        id="price-probe",
        roles=(RoleSpec("buyer", base_value=buyer_reservation, batna=0.0),
               RoleSpec("seller", base_value=-seller_floor, batna=0.0)),
        issues=(IssueSpec("price", "continuous", {"buyer": -1.0, "seller": 1.0},
                          lower=90.0, upper=160.0, step=1.0),),
    )


class TestZopaProbe:
    def test_nonempty_with_witness(self):
        status = zopa_probe(price_scenario(150.0, 120.0))
        assert not status.empty
        price = status.witness.assignments["price"]
        assert 120.0 < price < 150.0  # strictly improves both sides
        # 130 is also a witness
        scenario = price_scenario(150.0, 120.0)
        assert all(evaluate_utility(scenario, r.name, Outcome({"price": 130.0})) > r.batna
                   for r in scenario.roles)

    def test_empty(self):
        assert zopa_probe(price_scenario(100.0, 120.0)).empty

    def test_boundary_indifference_is_not_witness(self):
        # seller indifferent exactly at the floor: strictness excludes it
        scenario = Scenario(
            id="boundary",
            roles=(RoleSpec("buyer", base_value=120.0, batna=0.0),
                   RoleSpec("seller", base_value=-120.0, batna=0.0)),
            issues=(IssueSpec("price", "continuous", {"buyer": -1.0, "seller": 1.0},
                              lower=120.0, upper=120.0, step=1.0),),
        )
        assert zopa_probe(scenario).empty

    def test_empty_zone_means_no_strict_improvement_anywhere(self, toy_nozopa):
        assert zopa_probe(toy_nozopa).empty
        for outcome in enumerate_grid(toy_nozopa):
            worst = min(manual_utility(toy_nozopa, r.name, outcome) - r.batna
                        for r in toy_nozopa.roles)
            assert worst <= 0.0


class TestParetoAndElegantTrades:
    def test_identical_outcomes(self, toy_jobs):
        assert not pareto_dominates(toy_jobs, JOBS_OUTCOME, JOBS_OUTCOME)

    def test_better_for_one_equal_for_other(self, toy_jobs):
        # bonus 0 -> 10 at fixed salary/location: candidate +15, recruiter -12
        a = Outcome({"salary": 150.0, "location": "A", "bonus": 0.0})
        b = Outcome({"salary": 162.0, "location": "A", "bonus": 0.0})
        # moving salary 162 -> 150 helps recruiter (+12), hurts candidate (-12)
        assert not pareto_dominates(toy_jobs, a, b)
        # same outcome with one strictly-better coordinate for one role only
        better = Outcome({"salary": 150.0, "location": "A", "bonus": 0.0})
        worse_equal = Outcome({"salary": 151.0, "location": "A", "bonus": 0.0})
        # 151 -> 150 is better for recruiter, worse for candidate: not dominance
        assert not pareto_dominates(toy_jobs, better, worse_equal)

    def test_dominance_with_equality_on_one_side(self):
        scenario = Scenario(
            id="dom",
            roles=(RoleSpec("a"), RoleSpec("b")),
            issues=(
                IssueSpec("x", "continuous", {"a": 1.0, "b": 0.0}, lower=0.0, upper=10.0, step=1.0),
            ),
        )
        assert pareto_dominates(scenario, Outcome({"x": 5.0}), Outcome({"x": 3.0}))
        assert not pareto_dominates(scenario, Outcome({"x": 3.0}), Outcome({"x": 5.0}))

    def test_infeasible_rejected(self, toy_jobs):
        with pytest.raises(InfeasibleOutcomeError):
            pareto_dominates(toy_jobs, JOBS_OUTCOME,
                             Outcome({"salary": 1e6, "location": "A", "bonus": 0.0}))

    def test_irreflexive_antisymmetric_on_grid(self, toy_license):
        sample = list(itertools.islice(enumerate_grid(toy_license), 0, 300, 7))
        feasible = [o for o in sample if check_feasibility(toy_license, o).feasible]
        for a in feasible[:12]:
            assert not pareto_dominates(toy_license, a, a)
        for a, b in itertools.combinations(feasible[:12], 2):
            assert not (pareto_dominates(toy_license, a, b) and pareto_dominates(toy_license, b, a))

    def test_elegant_trade_examples(self, toy_jobs):
        start = Outcome({"salary": 150.0, "location": "B", "bonus": 0.0})
        target = Outcome({"salary": 150.0, "location": "A", "bonus": 12.0})
        # oracle: both utilities rise and the pie strictly grows across >= 2 issues
        for role in toy_jobs.role_names():
            assert manual_utility(toy_jobs, role, target) > manual_utility(toy_jobs, role, start)
        assert compute_pie(toy_jobs, target).total_pie > compute_pie(toy_jobs, start).total_pie
        assert len(target.differing_issues(start)) == 2
        assert is_elegant_trade(toy_jobs, start, target)

    def test_elegant_trade_rejects_identity_and_single_issue_change(self, toy_jobs):
        assert not is_elegant_trade(toy_jobs, JOBS_OUTCOME, JOBS_OUTCOME)
        single = Outcome({"salary": 150.0, "location": "A", "bonus": 12.0})
        # Pareto improvement for candidate only, changing exactly one issue
        base = Outcome({"salary": 150.0, "location": "A", "bonus": 0.0})
        improved = Outcome({"salary": 149.0, "location": "A", "bonus": 0.0})
        assert not is_elegant_trade(toy_jobs, base, improved)
        assert not is_elegant_trade(toy_jobs, base, single) or \
            len(single.differing_issues(base)) >= 2

    def test_single_issue_scenario_rejected(self, toy_price):
        outcome = Outcome({"price": 130.0})
        with pytest.raises(SingleIssueScenarioError):
            is_elegant_trade(toy_price, outcome, outcome)


class TestInvariants:
    def test_surpluses_sum_to_pie_and_shares_to_one(self, toy_jobs):
        for outcome in itertools.islice(enumerate_grid(toy_jobs), 0, 8000, 311):
            if not check_feasibility(toy_jobs, outcome).feasible:
                continue
            pie = compute_pie(toy_jobs, outcome)
            assert sum(pie.surpluses.values()) == pie.total_pie
            if pie.shares is not None:
                assert abs(sum(pie.shares.values()) - 1.0) < 1e-12

    def test_base_value_shift(self, toy_jobs):
        shifted_roles = (
            RoleSpec(
                name=toy_jobs.roles[0].name,
                base_value=toy_jobs.roles[0].base_value + 11.0,
                batna=toy_jobs.roles[0].batna,
                deal_breakers=toy_jobs.roles[0].deal_breakers,
            ),
            toy_jobs.roles[1],
        )
        shifted = Scenario(id="shifted", roles=shifted_roles, issues=toy_jobs.issues,
                           constraints=toy_jobs.constraints)
        base = compute_pie(toy_jobs, JOBS_OUTCOME)
        moved = compute_pie(shifted, JOBS_OUTCOME)
        role = toy_jobs.roles[0].name
        assert moved.utilities[role] == pytest.approx(base.utilities[role] + 11.0)
        assert moved.surpluses[role] == pytest.approx(base.surpluses[role] + 11.0)
        assert moved.total_pie == pytest.approx(base.total_pie + 11.0)
        # shares recomputed, not closed-form
        assert moved.shares[role] == pytest.approx(
            moved.surpluses[role] / moved.total_pie)


class TestSerialization:
    def test_round_trip(self, toy_jobs, toy_license):
        for scenario in (toy_jobs, toy_license):
            data = scenario_to_dict(scenario)
            back = scenario_from_dict(data)
            assert scenario_to_dict(back) == data

    def test_builtins_load(self):
        for name in ("toy-jobs", "toy-price", "toy-license", "toy-nozopa"):
            scenario = builtin_scenario(name)
            assert scenario.id == name
            assert len(scenario.roles) == 2

    def test_validation_rejects_bad_scenarios(self):
        with pytest.raises(Exception):
            Scenario(id="one-role", roles=(RoleSpec("a"),), issues=())  # type: ignore[arg-type]
        with pytest.raises(Exception):
            Scenario(
                id="bad-belief",
                roles=(RoleSpec("a"), RoleSpec("b")),
                issues=(IssueSpec("c", "contingent",
                                  {"a": {"belief": 1.5}, "b": {"belief": 0.5}},
                                  bonus_lower=0.0, bonus_upper=1.0),),
            )
