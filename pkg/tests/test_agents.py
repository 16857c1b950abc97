"""Scripted bot zoo and provider-backed agents (base and pro modes)."""

from __future__ import annotations

import json

import pytest

from parley.agents import AgentConfig, AgentConfigError, SideView, make_agent, make_view
from parley.agents.llm import (
    ConstraintNote,
    LlmAgent,
    RoundPlan,
    TrackedState,
    ValueEntry,
    initial_state,
    parse_round_plan,
    parse_tracked_state,
    serialize_round_plan,
    serialize_tracked_state,
)
from parley.agents.scripted import LinearConcessionBot, make_scripted_agent
from parley.gateway import StubProvider
from parley.protocol import DEAL_FAILED, Participant, advance, new_session, parse_control_tokens


def view_for(scenario, side=1, turns=(), pending=None, round_label="1.1"):
    roles = scenario.role_names()
    return SideView(
        scenario=scenario,
        side=side,
        role=roles[side - 1],
        turns=tuple(turns),
        round_label=round_label,
        pending_terms=pending,
        round_limit=scenario.round_limit,
    )


class TestScriptedBots:
    def test_walk_away_first_turn(self, toy_price):
        bot = make_scripted_agent("walk_away", {})
        assert bot.next_message(view_for(toy_price)) == DEAL_FAILED

    def test_linear_concession_schedule(self):
        bot = LinearConcessionBot({"issue": "price", "start": 100.0, "floor": 50.0})
        # closed form: start - (r-1) * (start-floor) / (rounds-1)
        assert bot.target(1, 6) == 100.0
        assert bot.target(3, 6) == pytest.approx(100.0 - 2 * (100.0 - 50.0) / 5)
        assert bot.target(6, 6) == 50.0

    def test_linear_concession_proposes_then_accepts(self, toy_price):
        bot = make_scripted_agent(
            "linear_concession",
            {"issue": "price", "start": 150, "floor": 130, "report_value": "exact"})
        first = bot.next_message(view_for(toy_price, side=2))
        event = parse_control_tokens(first)
        assert event.kind == "proposal"
        assert event.terms["price"] == 150
        # a pending proposal at least as good as the current target is accepted
        accept = bot.next_message(view_for(toy_price, side=2, pending={"price": 155.0},
                                           round_label="2.2"))
        assert parse_control_tokens(accept).terms["price"] == 155.0

    def test_accept_anything_mismatches_infeasible(self, toy_jobs):
        bot = make_scripted_agent("accept_anything", {})
        message = bot.next_message(view_for(
            toy_jobs, pending={"salary": 150, "location": "A", "bonus": 4000}))
        assert parse_control_tokens(message).kind == "misunderstanding"

    def test_cap_violating_package_breaks_bounds(self, toy_jobs):
        bot = make_scripted_agent("cap_violating", {"issue": "bonus", "margin": 7})
        event = parse_control_tokens(bot.next_message(view_for(toy_jobs)))
        assert event.terms["bonus"] == 47.0  # upper bound 40 + margin

    def test_scripted_bots_are_pure(self, toy_price):
        bot = make_scripted_agent(
            "linear_concession", {"issue": "price", "start": 150, "floor": 130})
        view = view_for(toy_price, round_label="3.1")
        assert bot.next_message(view) == bot.next_message(view)

    def test_unknown_bot_rejected(self):
        with pytest.raises(ValueError):
            make_scripted_agent("nonexistent", {})


class TestAgentConfig:
    def test_pro_mode_requires_llm(self):
        with pytest.raises(AgentConfigError):
            AgentConfig("scripted", "walk_away", mode="pro")

    def test_from_dict(self):
        config = AgentConfig.from_dict(
            {"policy": "llm", "model": "some-model", "mode": "pro",
             "sampling": {"temperature": 0.7}})
        assert config.name == "some-model"
        assert config.mode == "pro"


# Abridged scaffolding fixtures exercising the documented output formats.
STATE_FIXTURE = """\
ROUND: 4.1

OFFERS:
  Us:
    Location: Lakewood [unchanged]
    Mentor Rotation: 3-month satellite posting then main office [unchanged]
    Start Date: Aug 5 [unchanged]
    Base Salary: $155,000 → $140,000 [updated]
    Signing Bonus: $25,000 → $40,000 [updated]
    Vacation: 2 weeks [unchanged]

  Them:
    Location: Lakewood [unchanged]
    Base Salary: $140,000 [unchanged]
    Signing Bonus: $40,000 → $25,000 [updated]

  Best-So-Far:
    [$140k base; $40k bonus; Lakewood; Aug 5; 2 weeks; mentor rotation]

OPPONENT PATTERNS:
  Firm on Lakewood and $140k base cap; walked back the signing bonus.

OPPONENT VALUE MAP:
  [Location: high (Stated);
   Base salary: very high (Stated);
   Signing bonus: med (Hypothesis; walk-back from $40k to $25k);
   Start date: low–med (Hypothesis)]

OPPONENT CONSTRAINTS:
  [Location fixed at Lakewood (Stated);
   Base salary capped at $140k (Stated);
   Signing bonus ceiling unclear (Hypothesis)]
"""

PLAN_FIXTURE = """\
ROUND: 4.1

- ROUND GOAL: Restore the $40,000 signing bonus and close this round; if
  refused, settle no lower than $35,000 with every other term locked.

- KEY LEVERS: Their earlier $40k bonus offer; a same-day signature; the $140k
  base stays fixed along with all non-cash terms.

- TACTICS:
  - Lock every non-cash term and take the $140k base as offered.
  - Point back to the bonus figure they put on the table earlier.

- OFFER SCAFFOLD: Lakewood; Start Aug 5; Base $140,000; Vacation 2 weeks;
  Signing Bonus $40,000 (staged payout acceptable).
"""


class TestTrackedStateParsing:
    def test_initial_state_all_not_yet(self, exec_hire):
        state = initial_state(exec_hire)
        assert set(state.offers_us) == set(exec_hire.issue_names())
        assert all(v == "not yet" for v in state.offers_us.values())
        assert state.opponent_patterns == ""

    def test_fixture_updates_offers(self, exec_hire):
        prev = initial_state(exec_hire)
        state = parse_tracked_state(STATE_FIXTURE, prev, exec_hire, "4.1",
                                    last_opponent_turn=6)
        assert state.round_label == "4.1"
        assert state.offers_us["base_salary"] == 140000.0
        assert state.offers_us["signing_bonus"] == 40000.0
        assert state.offers_us["location"] == "Lakewood"
        assert state.offers_them["signing_bonus"] == 25000.0
        assert state.best_so_far is not None and "$40k bonus" in state.best_so_far
        assert "walked back" in state.opponent_patterns
        assert state.value_map["base_salary"].level == "high"
        assert state.value_map["base_salary"].basis == "Stated"
        assert state.value_map["base_salary"].turn == 6  # cited to the latest opponent turn
        assert state.value_map["signing_bonus"].basis == "Hypothesis"
        assert state.value_map["start_date"].level == "med"  # "low-med" normalizes to med
        assert any("140k" in c.text for c in state.constraints)

    def test_garbage_falls_back_to_prev(self, exec_hire):
        prev = parse_tracked_state(STATE_FIXTURE, initial_state(exec_hire), exec_hire, "4.1",
                                   last_opponent_turn=6)
        result = parse_tracked_state("complete nonsense, no sections at all",
                                     prev, exec_hire, "4.2", last_opponent_turn=7)
        assert result.round_label == "4.2"
        assert result.offers_us == prev.offers_us
        assert result.offers_them == prev.offers_them
        assert result.value_map == prev.value_map
        assert result.constraints == prev.constraints

    def test_stated_without_citation_downgrades_when_no_turn_known(self, exec_hire):
        text = "OPPONENT VALUE MAP:\n  [location: high (Stated)]"
        state = parse_tracked_state(text, initial_state(exec_hire), exec_hire, "1.1",
                                    last_opponent_turn=None)
        assert state.value_map["location"].basis == "Hypothesis"

    def test_round_trip(self, exec_hire):
        state = parse_tracked_state(STATE_FIXTURE, initial_state(exec_hire), exec_hire, "4.1",
                                    last_opponent_turn=6)
        text = serialize_tracked_state(state)
        reparsed = parse_tracked_state(text, initial_state(exec_hire), exec_hire, "4.1",
                                       last_opponent_turn=6)
        assert reparsed == state

    def test_round_trip_of_sparse_state(self, exec_hire):
        state = initial_state(exec_hire, "2.2")
        text = serialize_tracked_state(state)
        reparsed = parse_tracked_state(text, initial_state(exec_hire, "2.2"), exec_hire, "2.2")
        assert reparsed == state

    def test_stated_entries_must_cite_turns(self):
        with pytest.raises(ValueError):
            ValueEntry(level="high", basis="Stated", turn=None)
        with pytest.raises(ValueError):
            ConstraintNote(text="cap", basis="Stated", turn=None)


class TestRoundPlanParsing:
    def test_fixture_plan(self, exec_hire):
        plan = parse_round_plan(PLAN_FIXTURE, exec_hire, "4.1")
        assert "40,000" in plan.goal
        assert plan.offer_scaffold["base_salary"] == 140000.0
        assert plan.offer_scaffold["signing_bonus"] == 40000.0
        assert plan.offer_scaffold["start_date"] == "Aug 5"
        assert plan.offer_scaffold["vacation_weeks"] == 2.0

    def test_garbage_gives_minimal_fallback_plan(self, exec_hire):
        plan = parse_round_plan("???", exec_hire, "2.1",
                                fallback_scaffold={"base_salary": 150000.0})
        assert plan.goal == ""
        assert plan.offer_scaffold == {"base_salary": 150000.0}

    def test_out_of_bounds_scaffold_values_dropped(self, exec_hire):
        plan = parse_round_plan("- OFFER SCAFFOLD: Base $900,000", exec_hire, "1.1")
        assert "base_salary" not in plan.offer_scaffold

    def test_round_trip(self, exec_hire):
        plan = RoundPlan(round_label="3.1", goal="close today", key_levers="bonus",
                         tactics="anchor high", offer_scaffold={"base_salary": 140000.0})
        reparsed = parse_round_plan(serialize_round_plan(plan), exec_hire, "3.1")
        assert reparsed == plan


def pro_stub() -> StubProvider:
    return StubProvider(rules=[
        ("private state tracker", STATE_FIXTURE),
        ("strategic planning module", PLAN_FIXTURE),
        ("Compose your next outward message", "Let us lock the package."),
    ])


class TestLlmAgent:
    def test_base_mode_single_call_echo(self, toy_price):
        stub = StubProvider(script=['$DEAL_REACHED$ {"price": 130}'])
        agent = make_agent(AgentConfig("llm", "stub-model"), provider=stub)
        message = agent.next_message(view_for(toy_price))
        assert message == '$DEAL_REACHED$ {"price": 130}'
        assert len(stub.calls) == 1

    def test_pro_mode_three_calls_per_turn(self, exec_hire):
        stub = pro_stub()
        agent = make_agent(AgentConfig("llm", "stub-model", mode="pro"), provider=stub)
        message = agent.next_message(view_for(exec_hire))
        assert message == "Let us lock the package."
        assert len(stub.calls) == 3
        agent.next_message(view_for(exec_hire, round_label="1.2"))
        assert len(stub.calls) == 6

    def test_pro_mode_carries_state_and_plan(self, exec_hire):
        stub = pro_stub()
        agent = LlmAgent(AgentConfig("llm", "stub-model", mode="pro"), stub)
        agent.next_message(view_for(exec_hire))
        assert agent.tracked is not None
        assert agent.tracked.offers_us["base_salary"] == 140000.0
        assert agent.plan is not None and "40,000" in agent.plan.goal

    def test_first_planning_round_omits_prev_section(self, exec_hire):
        stub = pro_stub()
        agent = LlmAgent(AgentConfig("llm", "stub-model", mode="pro"), stub)
        agent.next_message(view_for(exec_hire))
        planning_call = stub.calls[1]
        prompt = "\n".join(m["content"] for m in planning_call["messages"])
        assert "PREVIOUS PLAN" not in prompt
        agent.next_message(view_for(exec_hire, round_label="1.2"))
        second_planning = stub.calls[4]
        prompt2 = "\n".join(m["content"] for m in second_planning["messages"])
        assert "PREVIOUS PLAN" in prompt2

    def test_sampling_params_passed_through(self, toy_price):
        stub = StubProvider(default="ok")
        config = AgentConfig("llm", "stub-model",
                             sampling={"temperature": 0.3, "max_tokens": 256})
        agent = make_agent(config, provider=stub)
        agent.next_message(view_for(toy_price))
        assert stub.calls[0]["params"] == {"temperature": 0.3, "max_tokens": 256}


class TestMakeView:
    def test_pending_only_visible_to_replier(self, toy_price):
        state = new_session(
            toy_price,
            Participant("buyer", "a", True),
            Participant("seller", "b", False),
        )
        state = advance(state, 1, '$DEAL_REACHED$ {"price": 130}')
        view = make_view(state, toy_price)
        assert view.side == 2
        assert view.pending_terms == {"price": 130}
        assert view.round_label == "1.2"
