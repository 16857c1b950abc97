"""Fixed-horizon turn protocol with an explicit deal handshake.

Sessions alternate free-form messages between two sides for at most
``round_limit`` major rounds (two half-turns per round, labeled ``major.minor``
like ``4.1``). Three literal control tokens steer termination:

* ``$DEAL_REACHED$`` followed by a JSON object opens (or, when the terms match
  the pending proposal, confirms) a deal handshake;
* ``$DEAL_MISUNDERSTANDING$`` declares the handshake broken (mismatch);
* ``$DEAL_FAILED$`` walks away unilaterally.

Everything else is a plain message. Parsing is total: malformed JSON after a
deal token is recorded as data (it feeds the output-validity metric), never an
exception. A strict JSON pass decides validity; a lenient repair pass exists
only to salvage terms for scoring and flips validity to 0.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any

from .scenarios import (
    Outcome,
    Scenario,
    check_feasibility,
    compute_pie,
    _as_bool,
    _match_option,
)

DEAL_REACHED = "$DEAL_REACHED$"
DEAL_MISUNDERSTANDING = "$DEAL_MISUNDERSTANDING$"
DEAL_FAILED = "$DEAL_FAILED$"

#: reserved self-valuation keys carried opaquely in proposals and excluded
#: from term matching
VALUATION_KEYS = (
    "total_value_of_deal_to_me",
    "total_points_of_deal_to_me",
    "expected_value_of_deal_to_me_in_millions",
)

NUMERIC_TOL = 1e-9


class SessionClosedError(RuntimeError):
    """Turn submitted to a session that already terminated."""


class OutOfTurnError(RuntimeError):
    """Turn submitted by the side that does not hold the floor."""


def is_valuation_key(key: str) -> bool:
    return key in VALUATION_KEYS or key.endswith("_to_me") or "_to_me_" in key


@dataclass(frozen=True)
class ControlEvent:
    """Parsed control content of one turn.

    kind is one of ``message``, ``proposal``, ``confirm``, ``misunderstanding``,
    ``failed``. ``terms`` holds the raw parsed JSON object (valuation keys
    included) for proposal/confirm turns; ``strict`` records whether that JSON
    parsed without the repair pass; ``parse_error`` records why parsing failed
    when it did.
    """

    kind: str
    terms: dict[str, Any] | None = None
    strict: bool = False
    parse_error: str | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.terms is not None:
            out["terms"] = self.terms
        if self.kind in ("proposal", "confirm"):
            out["strict"] = self.strict
        if self.parse_error is not None:
            out["parse_error"] = self.parse_error
        return out

    @staticmethod
    def from_dict(data: dict) -> "ControlEvent":
        return ControlEvent(
            kind=data["kind"],
            terms=data.get("terms"),
            strict=data.get("strict", False),
            parse_error=data.get("parse_error"),
        )


def _first_balanced_object(text: str) -> str | None:
    """Extract the first balanced {...} block, honoring JSON string escapes."""
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


def _repair_json(blob: str) -> str:
    """Best-effort cleanup of almost-JSON: quotes, trailing commas, literals."""
    fixed = blob.replace("'", '"')
    fixed = re.sub(r",\s*([}\]])", r"\1", fixed)
    fixed = re.sub(r"\bTrue\b", "true", fixed)
    fixed = re.sub(r"\bFalse\b", "false", fixed)
    fixed = re.sub(r"\bNone\b", "null", fixed)
    # quote bare object keys: {key: ...} -> {"key": ...}
    fixed = re.sub(r'([{,]\s*)([A-Za-z_][A-Za-z0-9_ -]*?)(\s*:)', r'\1"\2"\3', fixed)
    return fixed


def parse_control_tokens(raw_text: str, pending_terms: dict | None = None) -> ControlEvent:
    """Classify one turn's raw text into a ControlEvent. Total for any string.

    With ``pending_terms`` supplied (the state machine passes the open
    proposal), a deal token whose terms match the pending terms classifies as a
    confirmation; the bare call keeps the context-free spec signature.
    """
    if not isinstance(raw_text, str):
        raw_text = str(raw_text)
    positions = {
        token: raw_text.find(token)
        for token in (DEAL_REACHED, DEAL_MISUNDERSTANDING, DEAL_FAILED)
    }
    present = {t: p for t, p in positions.items() if p >= 0}
    if not present:
        return ControlEvent(kind="message")
    token = min(present, key=present.get)
    if token == DEAL_FAILED:
        return ControlEvent(kind="failed")
    if token == DEAL_MISUNDERSTANDING:
        return ControlEvent(kind="misunderstanding")

    tail = raw_text[present[token] + len(token):]
    blob = _first_balanced_object(tail)
    if blob is None:
        return ControlEvent(kind="proposal", parse_error="no JSON object after deal token")
    terms: dict | None = None
    strict = False
    parse_error: str | None = None
    try:
        parsed = json.loads(blob)
        if isinstance(parsed, dict):
            terms, strict = parsed, True
        else:
            parse_error = "deal JSON is not an object"
    except json.JSONDecodeError as exc:
        parse_error = f"strict parse failed: {exc.msg}"
        try:
            repaired = json.loads(_repair_json(blob))
            if isinstance(repaired, dict):
                terms = repaired
        except json.JSONDecodeError:
            pass
    if terms is None:
        return ControlEvent(kind="proposal", parse_error=parse_error or "unparsable deal JSON")
    if pending_terms is not None and terms_match(terms, pending_terms):
        return ControlEvent(kind="confirm", terms=terms, strict=strict, parse_error=parse_error)
    return ControlEvent(kind="proposal", terms=terms, strict=strict, parse_error=parse_error)


# ---------------------------------------------------------------------------
# term canonicalization


def canonical_terms(terms: dict[str, Any]) -> dict[str, Any]:
    """Terms with valuation keys dropped and surface forms normalized.

    Strings are trimmed and case-folded, numerics coerced to float; key order
    is sorted so canonical dicts compare stably.
    """
    out: dict[str, Any] = {}
    for key in sorted(terms):
        if is_valuation_key(key):
            continue
        out[str(key).strip()] = _canonical_value(terms[key])
    return out


def _canonical_value(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return float(text)
        except ValueError:
            return text.casefold()
    return value


def terms_match(a: dict[str, Any], b: dict[str, Any]) -> bool:
    """Issue-by-issue equality after canonicalization (1e-9 numeric tolerance)."""
    ca, cb = canonical_terms(a), canonical_terms(b)
    if set(ca) != set(cb):
        return False
    for key, va in ca.items():
        vb = cb[key]
        if isinstance(va, bool) or isinstance(vb, bool):
            if va is not vb:
                return False
        elif isinstance(va, float) and isinstance(vb, float):
            if not math.isclose(va, vb, rel_tol=0.0, abs_tol=NUMERIC_TOL):
                return False
        elif va != vb:
            return False
    return True


def self_valuation(terms: dict[str, Any] | None) -> float | None:
    """The numeric self-reported deal value carried in a proposal, if any."""
    if not terms:
        return None
    for key in VALUATION_KEYS:
        if key in terms and isinstance(terms[key], (int, float)) and not isinstance(terms[key], bool):
            return float(terms[key])
    for key, value in terms.items():
        if is_valuation_key(key) and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    return None


# ---------------------------------------------------------------------------
# session state machine


@dataclass(frozen=True)
class Participant:
    role: str
    policy_id: str
    first_mover: bool

    def to_dict(self) -> dict:
        return {"role": self.role, "policy_id": self.policy_id, "first_mover": self.first_mover}

    @staticmethod
    def from_dict(data: dict) -> "Participant":
        return Participant(data["role"], data["policy_id"], data["first_mover"])


@dataclass(frozen=True)
class Turn:
    round_label: str
    side: int
    raw_text: str
    control: ControlEvent

    def to_dict(self) -> dict:
        return {
            "round": self.round_label,
            "side": self.side,
            "raw_text": self.raw_text,
            "control": self.control.to_dict(),
        }

    @staticmethod
    def from_dict(data: dict) -> "Turn":
        return Turn(data["round"], data["side"], data["raw_text"], ControlEvent.from_dict(data["control"]))


PHASES = ("active", "awaiting_confirmation", "closed")
TERMINATIONS = ("confirmed_deal", "mismatch", "walk_away", "round_limit")


@dataclass(frozen=True)
class SessionState:
    """Immutable protocol state; `advance` is a pure transition."""

    scenario_id: str
    sides: tuple[Participant, Participant]
    round_limit: int = 6
    turns: tuple[Turn, ...] = ()
    phase: str = "active"
    pending_terms: dict[str, Any] | None = None
    pending_side: int | None = None
    termination: str | None = None
    final_terms: dict[str, dict] = field(default_factory=dict)  # "1"/"2" -> raw terms

    @property
    def first_mover(self) -> int:
        return 1 if self.sides[0].first_mover else 2

    @property
    def to_move(self) -> int | None:
        if self.phase == "closed":
            return None
        first = self.first_mover
        return first if len(self.turns) % 2 == 0 else 3 - first

    @property
    def round_index(self) -> str:
        """Label of the next half-round, e.g. '4.1' (mover-order based)."""
        return round_label(len(self.turns) + 1)

    def participant(self, side: int) -> Participant:
        return self.sides[side - 1]

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "sides": [p.to_dict() for p in self.sides],
            "round_limit": self.round_limit,
            "turns": [t.to_dict() for t in self.turns],
            "phase": self.phase,
            "pending_terms": self.pending_terms,
            "pending_side": self.pending_side,
            "termination": self.termination,
            "final_terms": self.final_terms,
        }

    @staticmethod
    def from_dict(data: dict) -> "SessionState":
        return SessionState(
            scenario_id=data["scenario_id"],
            sides=tuple(Participant.from_dict(p) for p in data["sides"]),
            round_limit=data["round_limit"],
            turns=tuple(Turn.from_dict(t) for t in data["turns"]),
            phase=data["phase"],
            pending_terms=data.get("pending_terms"),
            pending_side=data.get("pending_side"),
            termination=data.get("termination"),
            final_terms=data.get("final_terms", {}),
        )


def round_label(turn_index: int) -> str:
    """Half-round label for the 1-based global turn index: 1->1.1, 2->1.2, 3->2.1 ..."""
    major = (turn_index + 1) // 2
    minor = 1 if turn_index % 2 == 1 else 2
    return f"{major}.{minor}"


def new_session(scenario: Scenario, side1: Participant, side2: Participant) -> SessionState:
    if side1.first_mover == side2.first_mover:
        raise ValueError("exactly one side must be the first mover")
    return SessionState(scenario_id=scenario.id, sides=(side1, side2), round_limit=scenario.round_limit)


def advance(state: SessionState, side: int, raw_text: str) -> SessionState:
    """Append one turn and apply handshake/termination transitions."""
    if state.phase == "closed":
        raise SessionClosedError(f"session closed ({state.termination})")
    if side != state.to_move:
        raise OutOfTurnError(f"side {side} does not hold the floor")

    pending = state.pending_terms if state.phase == "awaiting_confirmation" else None
    event = parse_control_tokens(raw_text, pending_terms=pending)
    turn = Turn(round_label(len(state.turns) + 1), side, raw_text, event)
    turns = state.turns + (turn,)

    phase = state.phase
    pending_terms = state.pending_terms
    pending_side = state.pending_side
    termination = state.termination
    final_terms = dict(state.final_terms)

    if event.kind == "failed":
        phase, termination = "closed", "walk_away"
    elif event.kind == "misunderstanding":
        phase, termination = "closed", "mismatch"
    elif event.kind == "confirm":
        phase, termination = "closed", "confirmed_deal"
        final_terms[str(pending_side)] = pending_terms
        final_terms[str(side)] = event.terms
    elif event.kind == "proposal":
        if event.terms is not None:
            phase = "awaiting_confirmation"
            pending_terms, pending_side = event.terms, side
        # an unparsable proposal opens no handshake; recorded for validity only

    if phase != "closed" and len(turns) >= 2 * state.round_limit:
        phase, termination = "closed", "round_limit"

    return replace(
        state,
        turns=turns,
        phase=phase,
        pending_terms=pending_terms,
        pending_side=pending_side,
        termination=termination,
        final_terms=final_terms,
    )


def replay(scenario: Scenario, side1: Participant, side2: Participant,
           raw_texts: list[str]) -> SessionState:
    """Re-run advance over recorded raw texts; deterministic reconstruction."""
    state = new_session(scenario, side1, side2)
    for text in raw_texts:
        state = advance(state, state.to_move, text)
    return state


# ---------------------------------------------------------------------------
# finalization and the episode record


@dataclass(frozen=True)
class EpisodeRecord:
    """Closed session snapshot plus deterministic scoring.

    No-deal episodes (everything except a verified agreement) score at BATNA:
    utilities b_i, zero surpluses, zero pie, shares absent.
    """

    scenario_id: str
    session: SessionState
    termination: str
    verified_agreement: int  # A
    terms_matched: bool | None
    feasible: bool | None
    outcome: dict[str, Any] | None  # canonical issue -> value of the agreed deal
    utilities: dict[str, float]
    surpluses: dict[str, float]
    total_pie: float
    shares: dict[str, float] | None
    self_valuations: dict[str, float | None]  # "1"/"2" -> reported deal value
    validity: dict[str, int | None]  # "1"/"2" -> V flag (None: no structured output)
    aborted: bool = False
    abort_reason: str | None = None
    episode_id: str | None = None
    annotations: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "scenario_id": self.scenario_id,
            "session": self.session.to_dict(),
            "termination": self.termination,
            "verified_agreement": self.verified_agreement,
            "terms_matched": self.terms_matched,
            "feasible": self.feasible,
            "outcome": self.outcome,
            "utilities": self.utilities,
            "surpluses": self.surpluses,
            "total_pie": self.total_pie,
            "shares": self.shares,
            "self_valuations": self.self_valuations,
            "validity": self.validity,
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "annotations": self.annotations,
        }

    @staticmethod
    def from_dict(data: dict) -> "EpisodeRecord":
        return EpisodeRecord(
            scenario_id=data["scenario_id"],
            session=SessionState.from_dict(data["session"]),
            termination=data["termination"],
            verified_agreement=data["verified_agreement"],
            terms_matched=data.get("terms_matched"),
            feasible=data.get("feasible"),
            outcome=data.get("outcome"),
            utilities=data["utilities"],
            surpluses=data["surpluses"],
            total_pie=data["total_pie"],
            shares=data.get("shares"),
            self_valuations=data.get("self_valuations", {}),
            validity=data.get("validity", {}),
            aborted=data.get("aborted", False),
            abort_reason=data.get("abort_reason"),
            episode_id=data.get("episode_id"),
            annotations=data.get("annotations", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def terms_to_outcome(scenario: Scenario, terms: dict[str, Any]) -> Outcome | None:
    """Map canonical proposal terms onto a scenario Outcome, or None if malformed.

    Issue names match case-insensitively; categorical values are normalized to
    the canonical option spelling; numeric issues accept off-grid values (bounds
    are checked later by feasibility).
    """
    canon = canonical_terms(terms)
    lookup = {name.casefold(): name for name in scenario.issue_names()}
    assignments: dict[str, Any] = {}
    for key, value in canon.items():
        issue_name = lookup.get(key.casefold())
        if issue_name is None:
            return None
        issue = scenario.issue(issue_name)
        try:
            if issue.kind == "categorical":
                assignments[issue_name] = _match_option(issue, str(value))
            elif issue.kind == "boolean":
                assignments[issue_name] = _as_bool(value)
            else:
                assignments[issue_name] = float(value)
        except Exception:
            return None
    if set(assignments) != set(scenario.issue_names()):
        return None
    return Outcome(assignments)


def schema_valid(scenario: Scenario, terms: dict[str, Any] | None) -> bool:
    """Terms cover exactly the scenario's issues (extra valuation keys allowed)."""
    if terms is None:
        return False
    return terms_to_outcome(scenario, terms) is not None


def _last_structured_event(state: SessionState, side: int) -> ControlEvent | None:
    for turn in reversed(state.turns):
        if turn.side == side and turn.control.kind in ("proposal", "confirm"):
            return turn.control
    return None


def finalize(state: SessionState, scenario: Scenario, episode_id: str | None = None) -> EpisodeRecord:
    """Score a closed session into an EpisodeRecord.

    Verified agreement (A=1) requires: termination confirmed_deal, both sides'
    terms recorded and issue-by-issue equal after canonicalization, and a
    feasible mapped outcome. Everything else scores as no-deal at BATNAs.
    """
    if state.phase != "closed":
        raise ValueError("finalize requires a closed session")

    role_names = scenario.role_names()
    batna_utilities = {r.name: float(r.batna) for r in scenario.roles}
    zero_surplus = {name: 0.0 for name in role_names}

    terms1 = state.final_terms.get("1")
    terms2 = state.final_terms.get("2")
    terms_matched: bool | None = None
    feasible: bool | None = None
    outcome_dict = None
    verified = 0
    utilities = batna_utilities
    surpluses = zero_surplus
    total_pie = 0.0
    shares = None

    if state.termination == "confirmed_deal" and terms1 is not None and terms2 is not None:
        terms_matched = terms_match(terms1, terms2)
        outcome = terms_to_outcome(scenario, terms1) if terms_matched else None
        if outcome is not None:
            feasible = check_feasibility(scenario, outcome).feasible
            if terms_matched and feasible:
                verified = 1
                pie = compute_pie(scenario, outcome)
                utilities, surpluses = pie.utilities, pie.surpluses
                total_pie, shares = pie.total_pie, pie.shares
                outcome_dict = dict(outcome.assignments)
        else:
            feasible = False if terms_matched else None

    valuations: dict[str, float | None] = {}
    validity: dict[str, int | None] = {}
    for side in (1, 2):
        event = _last_structured_event(state, side)
        if event is None:
            valuations[str(side)] = None
            validity[str(side)] = None
        else:
            valuations[str(side)] = self_valuation(event.terms)
            validity[str(side)] = int(event.strict and schema_valid(scenario, event.terms))

    return EpisodeRecord(
        scenario_id=scenario.id,
        session=state,
        termination=state.termination,
        verified_agreement=verified,
        terms_matched=terms_matched,
        feasible=feasible,
        outcome=outcome_dict,
        utilities=utilities,
        surpluses=surpluses,
        total_pie=total_pie,
        shares=shares,
        self_valuations=valuations,
        validity=validity,
        episode_id=episode_id,
    )
