"""Experiment schedules, episode execution, metric extraction, and persistence.

Schedules are pure functions of their inputs and a master seed; per-episode
seeds derive from stable hashing of the schedule index so partial re-runs
reproduce. Episodes may execute concurrently (each owns its session and
agents); output ordering is by schedule index so repeated runs produce
identical JSONL. Judge annotation runs post-hoc over persisted transcripts so
expensive judging never blocks play.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .agents import AgentConfig, make_agent, make_view, render_role_brief
from .gateway import GatewayError, Provider
from .judges import JudgeParseFailure, judge_lies, judge_reputation, lie_rates, message_counts
from .protocol import EpisodeRecord, Participant, advance, finalize, new_session
from .ratings import PlayRecord
from .scenarios import Scenario, builtin_scenario, compute_pstar, load_scenario

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpisodeSpec:
    index: int
    scenario_id: str
    side1: str  # player id taking role 1
    side2: str  # player id taking role 2
    first_mover: int  # 1 or 2
    seed: int
    kind: str = "cross"

    @property
    def episode_id(self) -> str:
        return f"{self.kind}-{self.index:06d}"


@dataclass(frozen=True)
class ExperimentPlan:
    scenarios: tuple[str, ...]
    players: tuple[str, ...]
    kind: str  # "mirror" | "cross" | "screening" | "human_session"
    repetitions: int
    seed: int

    def __post_init__(self):
        if self.kind == "cross" and len(self.players) < 2:
            raise ValueError("cross-play requires at least 2 players")
        if self.repetitions < 1:
            raise ValueError("repetition counts must be >= 1")

    def schedule(self) -> list[EpisodeSpec]:
        if self.kind == "mirror":
            return make_mirrorplay_schedule(self.players, self.scenarios,
                                            m=self.repetitions, seed=self.seed)
        if self.kind == "cross":
            return make_crossplay_schedule(self.players, self.scenarios,
                                           n=self.repetitions, seed=self.seed)
        raise ValueError(f"no batch schedule for kind {self.kind!r}")


def derive_seed(master_seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{master_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def make_crossplay_schedule(
    players: Sequence[str],
    scenarios: Sequence[str],
    n: int = 6,
    seed: int = 0,
) -> list[EpisodeSpec]:
    """Every ordered pair per scenario, n repetitions each, mover order split
    ceil(n/2) / floor(n/2) within each directed pairing."""
    if len(players) < 2:
        raise ValueError("cross-play requires at least 2 players")
    specs: list[EpisodeSpec] = []
    index = 0
    first_half = (n + 1) // 2
    for scenario_id in scenarios:
        for side1 in players:
            for side2 in players:
                if side1 == side2:
                    continue
                for rep in range(n):
                    specs.append(EpisodeSpec(
                        index=index,
                        scenario_id=scenario_id,
                        side1=side1,
                        side2=side2,
                        first_mover=1 if rep < first_half else 2,
                        seed=derive_seed(seed, index),
                        kind="cross",
                    ))
                    index += 1
    return specs


def make_mirrorplay_schedule(
    players: Sequence[str],
    scenarios: Sequence[str],
    m: int = 20,
    seed: int = 0,
) -> list[EpisodeSpec]:
    """m episodes per (player, scenario); the same player takes both roles and
    mover order alternates across repetitions."""
    specs: list[EpisodeSpec] = []
    index = 0
    for scenario_id in scenarios:
        for player in players:
            for rep in range(m):
                specs.append(EpisodeSpec(
                    index=index,
                    scenario_id=scenario_id,
                    side1=player,
                    side2=player,
                    first_mover=1 if rep % 2 == 0 else 2,
                    seed=derive_seed(seed, index),
                    kind="mirror",
                ))
                index += 1
    return specs


# ---------------------------------------------------------------------------
# registry and episode execution


@dataclass
class Registry:
    """Resolves player ids to agent configs, scenario ids to scenarios."""

    agents: dict[str, AgentConfig]
    scenarios: dict[str, Scenario]
    provider_factory: Callable[[AgentConfig], Provider | None] = lambda config: None

    def scenario(self, scenario_id: str) -> Scenario:
        try:
            return self.scenarios[scenario_id]
        except KeyError:
            raise KeyError(f"unknown scenario {scenario_id!r}") from None

    def agent_for(self, player_id: str):
        try:
            config = self.agents[player_id]
        except KeyError:
            raise KeyError(f"unknown player {player_id!r}") from None
        return make_agent(config, provider=self.provider_factory(config))


def run_episode(spec: EpisodeSpec, registry: Registry) -> EpisodeRecord:
    """Drive both agents through the protocol until the session closes.

    Provider failures mark the episode aborted (distinct status, excluded from
    fits and metrics) rather than raising.
    """
    scenario = registry.scenario(spec.scenario_id)
    role1, role2 = scenario.role_names()
    state = new_session(
        scenario,
        Participant(role=role1, policy_id=spec.side1, first_mover=spec.first_mover == 1),
        Participant(role=role2, policy_id=spec.side2, first_mover=spec.first_mover == 2),
    )
    agents = {1: registry.agent_for(spec.side1), 2: registry.agent_for(spec.side2)}
    try:
        while state.phase != "closed":
            side = state.to_move
            view = make_view(state, scenario)
            message = agents[side].next_message(view)
            state = advance(state, side, message)
    except GatewayError as exc:
        logger.warning("episode %s aborted: %s", spec.episode_id, exc)
        record = EpisodeRecord(
            scenario_id=scenario.id,
            session=state,
            termination=state.termination or "aborted",
            verified_agreement=0,
            terms_matched=None,
            feasible=None,
            outcome=None,
            utilities={},
            surpluses={},
            total_pie=0.0,
            shares=None,
            self_valuations={},
            validity={},
            aborted=True,
            abort_reason=str(exc),
            episode_id=spec.episode_id,
        )
        return record
    return finalize(state, scenario, episode_id=spec.episode_id)


def run_schedule(
    specs: Sequence[EpisodeSpec],
    registry: Registry,
    parallelism: int = 1,
) -> list[EpisodeRecord]:
    """Execute a schedule, preserving schedule order in the result."""
    if parallelism <= 1:
        return [run_episode(spec, registry) for spec in specs]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda s: run_episode(s, registry), specs))


# ---------------------------------------------------------------------------
# metric extraction


@dataclass(frozen=True)
class MetricRow:
    """Run-level metrics for one side of one episode.

    validity / agreement / batna compliance are 0/1 flags (None when not
    evaluated); computation accuracy and the signed error are only defined for
    multi-issue scenarios with a verified deal and a reported self-valuation.
    """

    episode_id: str
    scenario_id: str
    side: int
    player: str
    role: str
    termination: str
    aborted: bool
    validity: int | None
    agreement: int
    batna_compliant: int | None
    accuracy: int | None
    signed_error: float | None
    lie_rate: float | None
    reputation: float | None
    total_pie: float
    normalized_pie: float | None
    share: float | None
    utility: float | None
    surplus: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


METRIC_FIELDS = tuple(MetricRow.__dataclass_fields__)


def extract_metrics(record: EpisodeRecord, scenario: Scenario,
                    pstar: float | None = None) -> tuple[MetricRow, MetricRow]:
    """Two MetricRows (side 1, side 2) per run-level metric definitions.

    BATNA compliance is evaluated only on verified deals (u_i >= b_i for both
    sides, same flag both rows). Computation accuracy compares the reported
    deal value to the deterministic utility, multi-issue scenarios only.
    """
    if record.aborted:
        raise ValueError("aborted episodes carry no metrics")
    roles = scenario.role_names()
    verified = record.verified_agreement
    batna_ok: int | None = None
    if verified == 1:
        batna_ok = int(all(
            record.utilities[r.name] >= r.batna for r in scenario.roles))
    normalized = None
    if pstar is not None and pstar > 0:
        normalized = record.total_pie / pstar

    annotations = record.annotations or {}
    lie = annotations.get("lie_rates") or {}
    reputation = annotations.get("reputation") or {}

    rows = []
    for side in (1, 2):
        role = roles[side - 1]
        reported = record.self_valuations.get(str(side))
        accuracy = None
        signed_error = None
        if verified == 1 and scenario.is_multi_issue() and reported is not None:
            truth = record.utilities[role]
            accuracy = int(reported == truth)
            signed_error = reported - truth
        rows.append(MetricRow(
            episode_id=record.episode_id or "",
            scenario_id=record.scenario_id,
            side=side,
            player=record.session.participant(side).policy_id,
            role=role,
            termination=record.termination,
            aborted=False,
            validity=record.validity.get(str(side)),
            agreement=verified,
            batna_compliant=batna_ok,
            accuracy=accuracy,
            signed_error=signed_error,
            lie_rate=lie.get(str(side)),
            reputation=reputation.get(str(side)),
            total_pie=record.total_pie,
            normalized_pie=normalized,
            share=(record.shares or {}).get(role),
            utility=record.utilities.get(role),
            surplus=record.surpluses.get(role),
        ))
    return rows[0], rows[1]


def extract_all_metrics(records: Iterable[EpisodeRecord], registry: Registry) -> list[MetricRow]:
    """Metric rows for all non-aborted records; P* is computed once per scenario."""
    pstars: dict[str, float | None] = {}
    rows: list[MetricRow] = []
    for record in records:
        if record.aborted:
            continue
        scenario = registry.scenario(record.scenario_id)
        if record.scenario_id not in pstars:
            if scenario.max_total_pie is not None:
                pstars[record.scenario_id] = scenario.max_total_pie
            else:
                try:
                    pstars[record.scenario_id] = compute_pstar(scenario)
                except Exception:
                    pstars[record.scenario_id] = None
        rows.extend(extract_metrics(record, scenario, pstars[record.scenario_id]))
    return rows


# ---------------------------------------------------------------------------
# judges over persisted episodes


def annotate_episode(record: EpisodeRecord, scenario: Scenario, judge: Provider) -> EpisodeRecord:
    """Attach lie and reputation judge outputs to a closed episode record."""
    if record.aborted:
        return record
    roles = scenario.role_names()
    contexts = tuple(render_role_brief(scenario, role) for role in roles)
    annotations = dict(record.annotations)
    try:
        annotation = judge_lies(record.session.turns, contexts, judge, role_names=roles)
        r1, r2 = lie_rates(annotation, record.session.turns)
        annotations["lies"] = annotation.to_dict()
        annotations["lie_rates"] = {"1": r1, "2": r2}
    except JudgeParseFailure as exc:
        logger.warning("lie judge failed for %s: %s", record.episode_id, exc)
        annotations["lies"] = {"invalid": True, "error": str(exc)}
        annotations["lie_rates"] = {"1": None, "2": None}
    reputation: dict[str, float | None] = {}
    details: dict[str, Any] = {}
    for side in (1, 2):
        hint = f"{roles[side - 1]} (side {side})"
        other = f"{roles[2 - side]} (side {3 - side})"
        try:
            scores = judge_reputation(record.session.turns, hint, judge,
                                      role_names=roles, other_hint=other)
            reputation[str(side)] = scores.overall
            details[str(side)] = scores.to_dict()
        except (JudgeParseFailure, ValueError) as exc:
            logger.warning("reputation judge failed for %s side %d: %s",
                           record.episode_id, side, exc)
            reputation[str(side)] = None
            details[str(side)] = {"invalid": True, "error": str(exc)}
    annotations["reputation"] = reputation
    annotations["reputation_details"] = details
    return replace(record, annotations=annotations)


# ---------------------------------------------------------------------------
# screening pipeline


@dataclass(frozen=True)
class ScreeningResult:
    player: str
    api_ok: bool
    nozopa_runs: int
    nozopa_walkaways: int
    nozopa_pass: bool
    multiissue_runs: int
    multiissue_failures: list[str]
    multiissue_pass: bool

    @property
    def passed(self) -> bool:
        return self.api_ok and self.nozopa_pass and self.multiissue_pass

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out


def screening_pipeline(
    players: Sequence[str],
    registry: Registry,
    nozopa_scenario: str = "toy-nozopa",
    multiissue_scenario: str = "toy-jobs",
    runs_per_probe: int = 6,
    seed: int = 0,
) -> dict[str, ScreeningResult]:
    """Three-stage per-player screen over base-mode mirror-play probes.

    (a) API feasibility: every probe episode completes without aborting.
    (b) Empty-bargaining-zone probe: every run must end walk_away.
    (c) Multi-issue probe: every run must reach a full agreement whose terms
        match exactly, comply with hard constraints, and leave both sides
        strictly above BATNA.
    """
    results: dict[str, ScreeningResult] = {}
    for player in players:
        nozopa_specs = make_mirrorplay_schedule([player], [nozopa_scenario],
                                                m=runs_per_probe, seed=seed)
        multi_specs = make_mirrorplay_schedule([player], [multiissue_scenario],
                                               m=runs_per_probe, seed=seed + 1)
        nozopa_records = [run_episode(spec, registry) for spec in nozopa_specs]
        multi_records = [run_episode(spec, registry) for spec in multi_specs]
        aborted = any(r.aborted for r in nozopa_records + multi_records)

        walkaways = sum(1 for r in nozopa_records
                        if not r.aborted and r.termination == "walk_away")
        nozopa_pass = not aborted and walkaways == len(nozopa_records)

        scenario = registry.scenario(multiissue_scenario)
        failures: list[str] = []
        for record in multi_records:
            if record.aborted:
                failures.append("aborted")
            elif record.termination != "confirmed_deal" or not record.terms_matched:
                failures.append("full-agreement")
            elif not record.feasible:
                failures.append("constraint-compliance")
            elif not all(record.utilities[r.name] > r.batna for r in scenario.roles):
                failures.append("batna-dominance")
        results[player] = ScreeningResult(
            player=player,
            api_ok=not aborted,
            nozopa_runs=len(nozopa_records),
            nozopa_walkaways=walkaways,
            nozopa_pass=nozopa_pass,
            multiissue_runs=len(multi_records),
            multiissue_failures=failures,
            multiissue_pass=not aborted and not failures,
        )
    return results


# ---------------------------------------------------------------------------
# plays for the ratings model


def plays_from_records(records: Iterable[EpisodeRecord]) -> list[PlayRecord]:
    """PlayRecords for verified deals with positive pie; everything else excluded.

    d is side 1's share minus side 2's; the mover flag is +1 when side 1 spoke
    first. Mirror-play records (same policy both sides) are excluded since a
    play needs two distinct players, and so are BATNA-violating deals, whose
    shares leave [0, 1] and would put d outside the model's [-1, 1] support.
    """
    plays: list[PlayRecord] = []
    for record in records:
        if record.aborted or record.verified_agreement != 1 or record.shares is None:
            continue
        session = record.session
        p1, p2 = session.sides
        if p1.policy_id == p2.policy_id:
            continue
        share1 = record.shares.get(p1.role)
        share2 = record.shares.get(p2.role)
        if share1 is None or share2 is None:
            continue
        if not (0.0 <= share1 <= 1.0 and 0.0 <= share2 <= 1.0):
            continue
        plays.append(PlayRecord(
            i=p1.policy_id,
            j=p2.policy_id,
            scenario=record.scenario_id,
            first_flag=1 if p1.first_mover else -1,
            d=share1 - share2,
        ))
    return plays


# ---------------------------------------------------------------------------
# persistence


def write_episodes_jsonl(records: Iterable[EpisodeRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")


def read_episodes_jsonl(path: str | Path) -> list[EpisodeRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(EpisodeRecord.from_dict(json.loads(line)))
    return records


def write_metrics_csv(rows: Iterable[MetricRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_dict())


def read_metrics_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# experiment config


@dataclass
class ExperimentConfig:
    """Parsed experiment config file: scenarios, players, schedule, judges."""

    scenarios: list[str]
    players: dict[str, AgentConfig]
    kind: str = "cross"
    repetitions: int | None = None
    seed: int = 0
    parallelism: int = 1
    judge: AgentConfig | None = None
    scenario_paths: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        players = {p["id"]: AgentConfig.from_dict(p) for p in data["players"]}
        judge = AgentConfig.from_dict(data["judge"]) if data.get("judge") else None
        scenario_ids: list[str] = []
        scenario_paths: dict[str, str] = {}
        for entry in data["scenarios"]:
            if isinstance(entry, str):
                scenario_ids.append(entry)
            else:
                scenario_ids.append(entry["id"])
                scenario_paths[entry["id"]] = entry["path"]
        return ExperimentConfig(
            scenarios=scenario_ids,
            players=players,
            kind=data.get("kind", "cross"),
            repetitions=data.get("repetitions"),
            seed=int(data.get("seed", 0)),
            parallelism=int(data.get("parallelism", 1)),
            judge=judge,
            scenario_paths=scenario_paths,
        )

    @staticmethod
    def load(path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return ExperimentConfig.from_dict(json.load(fh))

    def load_scenarios(self) -> dict[str, Scenario]:
        out = {}
        for scenario_id in self.scenarios:
            if scenario_id in self.scenario_paths:
                out[scenario_id] = load_scenario(self.scenario_paths[scenario_id])
            else:
                out[scenario_id] = builtin_scenario(scenario_id)
        return out

    def plan(self) -> ExperimentPlan:
        default = 20 if self.kind == "mirror" else 6
        return ExperimentPlan(
            scenarios=tuple(self.scenarios),
            players=tuple(sorted(self.players)),
            kind=self.kind,
            repetitions=self.repetitions or default,
            seed=self.seed,
        )

    def schedule(self) -> list[EpisodeSpec]:
        return self.plan().schedule()
