"""Chat-provider-backed negotiators.

Base mode makes a single provider call with the role brief and running
transcript. Pro mode first updates a private tracked state (offer landscape,
inferred opponent priorities and constraints) and a private round plan, then
feeds both back as internal scaffolding to the generation call: exactly three
provider calls per turn. Scaffold outputs are never shown to the opponent.

Parsers here are deliberately forgiving: provider text that fails to parse
falls back field-by-field to the previous value (the persistence rule), so a
garbage reply never crashes an episode.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any

from ..gateway import Provider
from ..scenarios import Scenario
from . import AgentConfig, SideView, render_role_brief, render_transcript_view

NOT_YET = "not yet"

_STOPWORDS = frozenset({"the", "a", "an", "of", "and", "or", "to", "in"})


def load_prompt(name: str) -> str:
    ref = resources.files("parley.assets.prompts").joinpath(f"{name}.txt")
    return ref.read_text(encoding="utf-8")


@dataclass(frozen=True)
class ValueEntry:
    """Inferred opponent priority for one issue."""

    level: str  # "high" | "med" | "low"
    basis: str  # "Stated" | "Hypothesis"
    turn: int | None = None

    def __post_init__(self):
        if self.level not in ("high", "med", "low"):
            raise ValueError(f"bad level {self.level!r}")
        if self.basis not in ("Stated", "Hypothesis"):
            raise ValueError(f"bad basis {self.basis!r}")
        if self.basis == "Stated" and self.turn is None:
            raise ValueError("Stated entries must cite a transcript turn index")


@dataclass(frozen=True)
class ConstraintNote:
    text: str
    basis: str
    turn: int | None = None

    def __post_init__(self):
        if self.basis not in ("Stated", "Hypothesis"):
            raise ValueError(f"bad basis {self.basis!r}")
        if self.basis == "Stated" and self.turn is None:
            raise ValueError("Stated constraints must cite a transcript turn index")


@dataclass(frozen=True)
class TrackedState:
    round_label: str
    offers_us: dict[str, Any] = field(default_factory=dict)
    offers_them: dict[str, Any] = field(default_factory=dict)
    best_so_far: str | None = None
    opponent_patterns: str = ""
    value_map: dict[str, ValueEntry] = field(default_factory=dict)
    constraints: tuple[ConstraintNote, ...] = ()


@dataclass(frozen=True)
class RoundPlan:
    round_label: str
    goal: str = ""
    key_levers: str = ""
    tactics: str = ""
    offer_scaffold: dict[str, Any] = field(default_factory=dict)


def initial_state(scenario: Scenario, round_label: str = "1.1") -> TrackedState:
    missing = {name: NOT_YET for name in scenario.issue_names()}
    return TrackedState(round_label=round_label, offers_us=dict(missing), offers_them=dict(missing))


# ---------------------------------------------------------------------------
# fuzzy issue matching and value normalization shared by the parsers


def _tokens(text: str) -> set[str]:
    return {t for t in re.split(r"[^a-z0-9]+", text.casefold()) if t and t not in _STOPWORDS}


def match_issue(scenario: Scenario, label: str) -> str | None:
    """Best scenario issue for a free-text label, by token overlap."""
    label_tokens = _tokens(label)
    if not label_tokens:
        return None
    best, best_score = None, 0
    for issue in scenario.issues:
        score = len(_tokens(issue.name) & label_tokens)
        if score > best_score:
            best, best_score = issue.name, score
    return best


_NUMBER = re.compile(r"-?\$?\d[\d,]*(?:\.\d+)?")


def parse_value_text(text: str):
    """'$155,000 -> $140,000 [updated]' -> 140000.0; 'not yet' stays literal."""
    cleaned = re.sub(r"\[(updated|unchanged)\]", "", text, flags=re.I)
    for arrow in ("→", "->"):
        if arrow in cleaned:
            cleaned = cleaned.split(arrow)[-1]
    cleaned = cleaned.strip().strip("[]").strip()
    if cleaned.casefold().startswith(NOT_YET):
        return NOT_YET
    match = _NUMBER.search(cleaned)
    if match and len(match.group(0).replace("$", "").replace(",", "")) >= len(cleaned.replace("$", "").replace(",", "").strip()) / 2:
        return float(match.group(0).replace("$", "").replace(",", ""))
    return cleaned


def first_number(text: str) -> float | None:
    match = _NUMBER.search(text)
    if not match:
        return None
    return float(match.group(0).replace("$", "").replace(",", ""))


def _basis_and_turn(text: str, default_turn: int | None) -> tuple[str, int | None]:
    basis = "Stated" if re.search(r"\bstated\b", text, flags=re.I) else "Hypothesis"
    turn = None
    cite = re.search(r"turn\s+(\d+)", text, flags=re.I) or re.search(r"\[(\d+)\]", text)
    if cite:
        turn = int(cite.group(1))
    if basis == "Stated" and turn is None:
        turn = default_turn
    if basis == "Stated" and turn is None:
        basis = "Hypothesis"  # nothing to cite: downgrade rather than fabricate
    return basis, turn


def _normalize_level(text: str) -> str | None:
    lowered = text.casefold()
    flags = [flag for flag, needle in (("high", "high"), ("med", "med"), ("low", "low"))
             if needle in lowered]
    if len(flags) >= 2:
        return "med"  # hyphenated ranges like "low-med" collapse to the middle
    return flags[0] if flags else None


# ---------------------------------------------------------------------------
# tracked-state parsing and serialization

_SECTION_HEADERS = ("ROUND:", "OFFERS:", "OPPONENT PATTERNS:", "OPPONENT VALUE MAP:",
                    "OPPONENT CONSTRAINTS:")


def _split_sections(text: str) -> dict[str, str]:
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        stripped = line.strip()
        upper = stripped.upper()
        matched = next((h for h in _SECTION_HEADERS if upper.startswith(h)), None)
        if matched:
            current = matched
            sections[current] = [stripped[len(matched):].strip()]
        elif current:
            sections[current].append(line.rstrip())
    return {k: "\n".join(v).strip() for k, v in sections.items()}


def _parse_offer_block(block: str, scenario: Scenario, prev: dict[str, Any]) -> dict[str, Any]:
    offers = dict(prev)
    entries: list[str] = []
    inline = block.strip()
    if inline.startswith("[") and inline.endswith("]"):
        entries = inline[1:-1].split(";")
    else:
        for line in block.splitlines():
            line = line.strip().lstrip("-").strip()
            if ":" in line:
                entries.append(line)
    for entry in entries:
        if ":" not in entry:
            continue
        label, value_text = entry.split(":", 1)
        issue = match_issue(scenario, label)
        if issue is None:
            continue
        offers[issue] = parse_value_text(value_text)
    return offers


def _parse_offers(section: str, scenario: Scenario, prev: TrackedState) -> tuple[dict, dict, str | None]:
    lines = section.splitlines()
    blocks: dict[str, list[str]] = {}
    current = None
    for line in lines:
        stripped = line.strip()
        lowered = stripped.casefold()
        if lowered.startswith("us:"):
            current = "us"
            blocks[current] = [stripped[3:].strip()]
        elif lowered.startswith("them:"):
            current = "them"
            blocks[current] = [stripped[5:].strip()]
        elif lowered.startswith("best-so-far:"):
            current = "best"
            blocks[current] = [stripped[len("best-so-far:"):].strip()]
        elif current:
            blocks[current].append(line)
    us = _parse_offer_block("\n".join(blocks.get("us", [])), scenario, prev.offers_us)
    them = _parse_offer_block("\n".join(blocks.get("them", [])), scenario, prev.offers_them)
    best = prev.best_so_far
    if "best" in blocks:
        text = "\n".join(blocks["best"]).strip().strip("[]").strip()
        if text:
            best = None if text.casefold() in ("n/a", "na", "none") else text
    return us, them, best


def parse_tracked_state(
    text: str,
    prev: TrackedState,
    scenario: Scenario,
    round_label: str,
    last_opponent_turn: int | None = None,
) -> TrackedState:
    """Parse a state-tracking reply; unparseable sections keep `prev` values.

    The round label always advances to the view's label regardless of what the
    reply claims. Stated entries without an explicit citation are attributed
    to the most recent opponent turn.
    """
    sections = _split_sections(text or "")
    us, them, best = prev.offers_us, prev.offers_them, prev.best_so_far
    if "OFFERS:" in sections:
        us, them, best = _parse_offers(sections["OFFERS:"], scenario, prev)
    patterns = prev.opponent_patterns
    if sections.get("OPPONENT PATTERNS:"):
        patterns = re.sub(r"\s+", " ", sections["OPPONENT PATTERNS:"].strip("[] \n")).strip()
        if patterns.casefold() == "none yet":  # serializer placeholder for empty
            patterns = ""
    value_map = dict(prev.value_map)
    if sections.get("OPPONENT VALUE MAP:"):
        parsed = _parse_value_map(sections["OPPONENT VALUE MAP:"], scenario, last_opponent_turn)
        if parsed:
            value_map = parsed
    constraints = prev.constraints
    if sections.get("OPPONENT CONSTRAINTS:"):
        parsed_constraints = _parse_constraints(sections["OPPONENT CONSTRAINTS:"], last_opponent_turn)
        if parsed_constraints:
            constraints = parsed_constraints
    return TrackedState(
        round_label=round_label,
        offers_us=us,
        offers_them=them,
        best_so_far=best,
        opponent_patterns=patterns,
        value_map=value_map,
        constraints=constraints,
    )


def _parse_value_map(section: str, scenario: Scenario, default_turn: int | None) -> dict[str, ValueEntry]:
    body = section.strip().strip("[]")
    out: dict[str, ValueEntry] = {}
    for entry in re.split(r";|\n", body):
        entry = entry.strip().lstrip("-").strip()
        if ":" not in entry:
            continue
        label, rest = entry.split(":", 1)
        issue = match_issue(scenario, label)
        level = _normalize_level(rest)
        if issue is None or level is None:
            continue
        basis, turn = _basis_and_turn(rest, default_turn)
        out[issue] = ValueEntry(level=level, basis=basis, turn=turn)
    return out


def _parse_constraints(section: str, default_turn: int | None) -> tuple[ConstraintNote, ...]:
    body = section.strip().strip("[]")
    notes = []
    for entry in re.split(r";|\n", body):
        entry = entry.strip().lstrip("-").strip()
        if not entry:
            continue
        basis, turn = _basis_and_turn(entry, default_turn)
        text = re.sub(r"\((Stated|Hypothesis)[^)]*\)", "", entry, flags=re.I).strip().rstrip(",")
        if not text:
            continue
        notes.append(ConstraintNote(text=text, basis=basis, turn=turn))
    return tuple(notes)


def _format_value(value) -> str:
    if isinstance(value, float) and value == int(value):
        return str(int(value))
    return str(value)


def serialize_tracked_state(state: TrackedState) -> str:
    def offers_line(offers: dict[str, Any]) -> str:
        return "[" + "; ".join(f"{k}: {_format_value(v)}" for k, v in offers.items()) + "]"

    def note(basis: str, turn: int | None) -> str:
        return f"({basis}, turn {turn})" if turn is not None else f"({basis})"

    value_entries = "; ".join(
        f"{k}: {v.level} {note(v.basis, v.turn)}" for k, v in state.value_map.items())
    constraint_entries = "; ".join(
        f"{c.text} {note(c.basis, c.turn)}" for c in state.constraints)
    return "\n".join([
        f"ROUND: {state.round_label}",
        "",
        "OFFERS:",
        f"  Us: {offers_line(state.offers_us)}",
        f"  Them: {offers_line(state.offers_them)}",
        f"  Best-So-Far: {state.best_so_far if state.best_so_far is not None else 'n/a'}",
        "",
        "OPPONENT PATTERNS:",
        f"  {state.opponent_patterns or 'none yet'}",
        "",
        "OPPONENT VALUE MAP:",
        f"  [{value_entries}]",
        "",
        "OPPONENT CONSTRAINTS:",
        f"  [{constraint_entries}]",
    ])


# ---------------------------------------------------------------------------
# round-plan parsing and serialization

_PLAN_MARKERS = ("ROUND GOAL:", "KEY LEVERS:", "TACTICS:", "OFFER SCAFFOLD:")


def parse_package_text(text: str | None, scenario: Scenario) -> dict[str, Any]:
    """Extract a partial outcome from a free-text package description.

    Numeric values violating issue bounds are dropped so the scaffold always
    satisfies the scenario's bounds.
    """
    if not text:
        return {}
    scaffold: dict[str, Any] = {}
    for part in re.split(r";|\n", text):
        part = part.strip().lstrip("-").strip()
        if not part:
            continue
        issue_name = match_issue(scenario, part)
        if issue_name is None or issue_name in scaffold:
            continue
        issue = scenario.issue(issue_name)
        if issue.kind == "categorical":
            part_fold = part.casefold()
            for option in issue.options:
                if option.casefold() in part_fold:
                    scaffold[issue_name] = option
                    break
        elif issue.kind == "boolean":
            if re.search(r"\b(no|false|without)\b", part, flags=re.I):
                scaffold[issue_name] = False
            elif re.search(r"\b(yes|true|with)\b", part, flags=re.I):
                scaffold[issue_name] = True
        else:
            number = first_number(part)
            if number is not None:
                lo, hi = issue.bounds()
                if lo <= number <= hi:
                    scaffold[issue_name] = number
    return scaffold


def parse_round_plan(
    text: str,
    scenario: Scenario,
    round_label: str,
    fallback_scaffold: dict[str, Any] | None = None,
) -> RoundPlan:
    """Parse a planning reply; on failure return a minimal plan with only the
    fallback scaffold (the opponent's best package so far)."""
    chunks: dict[str, str] = {}
    if text:
        upper = text.upper()
        positions = sorted(
            (upper.find(marker), marker) for marker in _PLAN_MARKERS if upper.find(marker) >= 0
        )
        for index, (pos, marker) in enumerate(positions):
            end = positions[index + 1][0] if index + 1 < len(positions) else len(text)
            chunks[marker] = text[pos + len(marker):end].strip().strip("-").strip()
    if not chunks:
        return RoundPlan(round_label=round_label, offer_scaffold=dict(fallback_scaffold or {}))
    scaffold = parse_package_text(chunks.get("OFFER SCAFFOLD:"), scenario)
    if not scaffold and fallback_scaffold:
        scaffold = dict(fallback_scaffold)
    return RoundPlan(
        round_label=round_label,
        goal=re.sub(r"\s+", " ", chunks.get("ROUND GOAL:", "")).strip(),
        key_levers=re.sub(r"\s+", " ", chunks.get("KEY LEVERS:", "")).strip(),
        tactics=chunks.get("TACTICS:", "").strip(),
        offer_scaffold=scaffold,
    )


def serialize_round_plan(plan: RoundPlan) -> str:
    scaffold = "; ".join(f"{k}: {_format_value(v)}" for k, v in plan.offer_scaffold.items())
    return "\n".join([
        f"ROUND:\n  {plan.round_label}",
        "",
        "CONTENT:",
        f"  - ROUND GOAL: {plan.goal}",
        f"  - KEY LEVERS: {plan.key_levers}",
        f"  - TACTICS: {plan.tactics}",
        f"  - OFFER SCAFFOLD: {scaffold}",
    ])


# ---------------------------------------------------------------------------
# the agent


def _last_opponent_turn_index(view: SideView) -> int | None:
    for index in range(len(view.turns), 0, -1):
        if view.turns[index - 1].side != view.side:
            return index
    return None


def update_tracked_state(prev: TrackedState, view: SideView, provider: Provider,
                         sampling: dict[str, Any] | None = None) -> TrackedState:
    """One provider call with the state-tracking prompt; robust parse."""
    brief = render_role_brief(view.scenario, view.role)
    user = (
        "MY ROLE INSTRUCTIONS AND PRIVATE CONTEXT:\n"
        f"{brief}\n\n"
        "NEGOTIATION TRANSCRIPT SO FAR:\n"
        f"{render_transcript_view(view)}\n\n"
        "PREVIOUS TRACKED STATE:\n"
        f"{serialize_tracked_state(prev)}"
    )
    reply = provider.complete(
        [{"role": "system", "content": load_prompt("state_tracking")},
         {"role": "user", "content": user}],
        **(sampling or {}),
    )
    return parse_tracked_state(reply, prev, view.scenario, view.round_label,
                               last_opponent_turn=_last_opponent_turn_index(view))


def plan_round(state: TrackedState, prev_plan: RoundPlan | None, view: SideView,
               provider: Provider, sampling: dict[str, Any] | None = None) -> RoundPlan:
    """One provider call with the planning prompt; minimal plan on parse failure."""
    brief = render_role_brief(view.scenario, view.role)
    parts = [
        "MY ROLE INSTRUCTIONS AND PRIVATE CONTEXT:\n" + brief,
        "CURRENT TRACKED STATE:\n" + serialize_tracked_state(state),
    ]
    if prev_plan is not None:
        parts.append("PREVIOUS PLAN:\n" + serialize_round_plan(prev_plan))
    reply = provider.complete(
        [{"role": "system", "content": load_prompt("planning")},
         {"role": "user", "content": "\n\n".join(parts)}],
        **(sampling or {}),
    )
    fallback = parse_package_text(state.best_so_far, view.scenario)
    return parse_round_plan(reply, view.scenario, view.round_label, fallback_scaffold=fallback)


class LlmAgent:
    """Base- or pro-mode negotiator over a chat provider.

    Scaffold state (tracked state and previous plan) lives on the instance and
    is carried across this episode's turns only; orchestrators create a fresh
    agent per episode side.
    """

    def __init__(self, config: AgentConfig, provider: Provider):
        self.config = config
        self.provider = provider
        self.tracked: TrackedState | None = None
        self.plan: RoundPlan | None = None

    def next_message(self, view: SideView) -> str:
        if self.config.mode == "pro":
            return self._pro_turn(view)
        return self._generate(view, scaffold=None)

    def _pro_turn(self, view: SideView) -> str:
        prev = self.tracked or initial_state(view.scenario, view.round_label)
        self.tracked = update_tracked_state(prev, view, self.provider, self.config.sampling)
        self.plan = plan_round(self.tracked, self.plan, view, self.provider, self.config.sampling)
        return self._generate(view, scaffold=(self.tracked, self.plan))

    def _generate(self, view: SideView, scaffold) -> str:
        system = render_role_brief(view.scenario, view.role)
        parts = ["NEGOTIATION TRANSCRIPT SO FAR:\n" + render_transcript_view(view)]
        if scaffold is not None:
            tracked, plan = scaffold
            parts.append("PRIVATE TRACKED STATE (internal, never reveal):\n"
                         + serialize_tracked_state(tracked))
            parts.append("PRIVATE ROUND PLAN (internal, never reveal):\n"
                         + serialize_round_plan(plan))
        parts.append(
            f"It is your turn (round {view.round_label}). "
            "Compose your next outward message to the counterparty."
        )
        return self.provider.complete(
            [{"role": "system", "content": system},
             {"role": "user", "content": "\n\n".join(parts)}],
            **self.config.sampling,
        )
