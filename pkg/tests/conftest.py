from __future__ import annotations

import pytest

from parley.agents import AgentConfig
from parley.orchestrator import Registry
from parley.scenarios import (
    CrossIssueConstraint,
    IssueSpec,
    RoleSpec,
    Scenario,
    builtin_scenario,
)


@pytest.fixture(scope="session")
def toy_jobs() -> Scenario:
    return builtin_scenario("toy-jobs")


@pytest.fixture(scope="session")
def toy_price() -> Scenario:
    return builtin_scenario("toy-price")


@pytest.fixture(scope="session")
def toy_license() -> Scenario:
    return builtin_scenario("toy-license")


@pytest.fixture(scope="session")
def toy_nozopa() -> Scenario:
    return builtin_scenario("toy-nozopa")


@pytest.fixture(scope="session")
def exec_hire() -> Scenario:
    """Multi-issue hiring scenario used by the scaffold-parsing fixtures."""
    return Scenario(
        id="exec-hire",
        roles=(
            RoleSpec(name="recruiter", base_value=250_000.0, batna=20_000.0),
            RoleSpec(name="candidate", base_value=0.0, batna=120_000.0),
        ),
        issues=(
            IssueSpec(
                name="base_salary", kind="continuous",
                lower=120_000.0, upper=180_000.0, step=1_000.0,
                values={"recruiter": -1.0, "candidate": 1.0},
            ),
            IssueSpec(
                name="signing_bonus", kind="continuous",
                lower=0.0, upper=50_000.0, step=1_000.0,
                values={"recruiter": -1.1, "candidate": 1.3},
            ),
            IssueSpec(
                name="location", kind="categorical",
                options=("Lakewood", "Kyoto", "Harbor City"),
                values={
                    "recruiter": {"Lakewood": 30_000.0, "Kyoto": 0.0, "Harbor City": 10_000.0},
                    "candidate": {"Lakewood": 5_000.0, "Kyoto": 15_000.0, "Harbor City": 0.0},
                },
            ),
            IssueSpec(
                name="start_date", kind="categorical",
                options=("Aug 1", "Aug 5"),
                values={
                    "recruiter": {"Aug 1": 10_000.0, "Aug 5": 0.0},
                    "candidate": {"Aug 1": 0.0, "Aug 5": 8_000.0},
                },
            ),
            IssueSpec(
                name="mentor_rotation", kind="boolean",
                values={
                    "recruiter": {"true": -5_000.0, "false": 0.0},
                    "candidate": {"true": 12_000.0, "false": 0.0},
                },
            ),
            IssueSpec(
                name="vacation_weeks", kind="continuous",
                lower=2.0, upper=4.0, step=0.5,
                values={"recruiter": -3_000.0, "candidate": 4_000.0},
            ),
        ),
        constraints=(
            CrossIssueConstraint(
                description="the rotation is feasible only with an Aug 1 start",
                if_issue="mentor_rotation", if_value=True,
                then_issue="start_date", allowed_values=("Aug 1",),
            ),
        ),
    )


def zoo_configs() -> dict[str, AgentConfig]:
    return {
        "walker": AgentConfig("scripted", "walk_away"),
        "accept": AgentConfig("scripted", "accept_anything", {"report_value": "exact"}),
        "conceder": AgentConfig(
            "scripted", "linear_concession",
            {"issue": "salary", "start": 160, "floor": 130,
             "fixed_terms": {"location": "A", "bonus": 12}, "report_value": "exact"},
        ),
        "prudent": AgentConfig(
            "scripted", "linear_concession",
            {"issue": "salary", "start": 130, "floor": 150,
             "fixed_terms": {"location": "A", "bonus": 10},
             "report_value": "exact", "walk_if_no_zopa": True},
        ),
        "capbuster": AgentConfig("scripted", "cap_violating", {"issue": "bonus"}),
        "chatter": AgentConfig("scripted", "batna_truthful"),
    }


@pytest.fixture()
def zoo_registry(toy_jobs, toy_price, toy_nozopa, toy_license) -> Registry:
    return Registry(
        agents=zoo_configs(),
        scenarios={
            "toy-jobs": toy_jobs,
            "toy-price": toy_price,
            "toy-nozopa": toy_nozopa,
            "toy-license": toy_license,
        },
    )
