"""HTTP session API for live human-vs-agent negotiation.

One session pairs a human (via this API) against a configured agent. Tokens
are unguessable (192-bit) opaque ids; no turn is accepted before consent.
Responses never serialize the agent's private role brief, tracked state, or
plans. Sessions persist through an append-only journal: replaying it
reconstructs identical protocol states after a restart. Demographics live in
a separate file keyed by token, never next to the transcript.

Endpoints (JSON, schema version in the X-Arena-Schema-Version header):

    POST /sessions                          create a session
    POST /sessions/{token}/consent          record consent (+ optional demographics)
    POST /sessions/{token}/messages         submit the human's turn
    GET  /sessions/{token}                  visible state
"""

from __future__ import annotations

import json
import logging
import random
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .agents import Agent, AgentConfig, make_agent, make_view, render_role_brief
from .gateway import GatewayError, Provider
from .protocol import (
    EpisodeRecord,
    OutOfTurnError,
    Participant,
    SessionClosedError,
    SessionState,
    advance,
    finalize,
    new_session,
)
from .scenarios import Scenario

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
SCHEMA_HEADER = "X-Arena-Schema-Version"


def new_token() -> str:
    return secrets.token_urlsafe(24)  # 192 bits


@dataclass
class HumanSession:
    token: str
    scenario_id: str
    state: SessionState
    human_side: int
    agent_player_id: str
    agent: Agent
    consent_accepted: bool = False
    created_at: float = field(default_factory=time.time)
    closed_at: float | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def agent_side(self) -> int:
        return 3 - self.human_side


class SessionStore:
    """In-memory sessions plus an append-only journal for crash recovery.

    The journal records creation, consent, and every raw turn; agent turns are
    journaled too, so replay never re-invokes a provider. Demographics go to a
    separate file keyed by token.
    """

    def __init__(
        self,
        scenarios: dict[str, Scenario],
        agent_configs: dict[str, AgentConfig],
        provider_factory=lambda config: None,
        journal_path: str | Path | None = None,
        demographics_path: str | Path | None = None,
        seed: int | None = None,
    ):
        self.scenarios = scenarios
        self.agent_configs = agent_configs
        self.provider_factory = provider_factory
        self.journal_path = Path(journal_path) if journal_path else None
        self.demographics_path = Path(demographics_path) if demographics_path else None
        self.sessions: dict[str, HumanSession] = {}
        self._journal_lock = threading.Lock()
        self.rng = random.Random(seed)
        if seed is not None:
            logger.info("session store randomization seed: %d", seed)
        if self.journal_path and self.journal_path.exists():
            self._replay_journal()

    # -- journal -----------------------------------------------------------

    def _journal(self, event: dict) -> None:
        if self.journal_path is None:
            return
        with self._journal_lock:
            with open(self.journal_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay_journal(self) -> None:
        with open(self.journal_path, encoding="utf-8") as fh:
            events = [json.loads(line) for line in fh if line.strip()]
        for event in events:
            kind = event["event"]
            if kind == "created":
                self._create_from_journal(event)
            elif kind == "consent":
                session = self.sessions.get(event["token"])
                if session:
                    session.consent_accepted = True
            elif kind == "turn":
                session = self.sessions.get(event["token"])
                if session:
                    session.state = advance(session.state, event["side"], event["text"])
        logger.info("journal replay restored %d sessions", len(self.sessions))

    def _create_from_journal(self, event: dict) -> None:
        scenario = self.scenarios[event["scenario_id"]]
        state = SessionState(
            scenario_id=scenario.id,
            sides=tuple(Participant.from_dict(p) for p in event["sides"]),
            round_limit=scenario.round_limit,
        )
        config = self.agent_configs[event["agent_player_id"]]
        session = HumanSession(
            token=event["token"],
            scenario_id=scenario.id,
            state=state,
            human_side=event["human_side"],
            agent_player_id=event["agent_player_id"],
            agent=make_agent(config, provider=self.provider_factory(config)),
        )
        self.sessions[session.token] = session

    # -- operations --------------------------------------------------------

    def create_session(
        self,
        scenario_id: str,
        human_role: str,
        agent_player_id: str,
        first_mover: str = "random",
    ) -> HumanSession:
        scenario = self.scenarios[scenario_id]
        roles = scenario.role_names()
        if human_role not in roles:
            raise KeyError(f"unknown role {human_role!r}")
        human_side = roles.index(human_role) + 1
        config = self.agent_configs[agent_player_id]
        if first_mover == "random":
            mover = self.rng.choice(("human", "agent"))
        else:
            mover = first_mover
        mover_side = human_side if mover == "human" else 3 - human_side
        participants: list[Participant] = []
        for side in (1, 2):
            participants.append(Participant(
                role=roles[side - 1],
                policy_id="human" if side == human_side else agent_player_id,
                first_mover=side == mover_side,
            ))
        state = new_session(scenario, participants[0], participants[1])
        session = HumanSession(
            token=new_token(),
            scenario_id=scenario_id,
            state=state,
            human_side=human_side,
            agent_player_id=agent_player_id,
            agent=make_agent(config, provider=self.provider_factory(config)),
        )
        self.sessions[session.token] = session
        self._journal({
            "event": "created",
            "token": session.token,
            "scenario_id": scenario_id,
            "sides": [p.to_dict() for p in state.sides],
            "human_side": human_side,
            "agent_player_id": agent_player_id,
            "first_mover_choice": mover,
        })
        return session

    def get(self, token: str) -> HumanSession:
        try:
            return self.sessions[token]
        except KeyError:
            raise KeyError(token) from None

    def record_consent(self, token: str, demographics: dict | None) -> None:
        session = self.get(token)
        session.consent_accepted = True
        self._journal({"event": "consent", "token": token})
        if demographics and self.demographics_path:
            with self._journal_lock:
                with open(self.demographics_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"token": token, "answers": demographics},
                                        sort_keys=True) + "\n")

    def apply_turn(self, session: HumanSession, side: int, text: str) -> None:
        session.state = advance(session.state, side, text)
        self._journal({"event": "turn", "token": session.token, "side": side, "text": text})
        if session.state.phase == "closed" and session.closed_at is None:
            session.closed_at = time.time()
            self._journal({"event": "closed", "token": session.token,
                           "termination": session.state.termination})

    def agent_turns(self, session: HumanSession, scenario: Scenario) -> list[dict]:
        """Generate agent turns while the agent holds the floor."""
        produced = []
        while session.state.phase != "closed" and session.state.to_move == session.agent_side:
            view = make_view(session.state, scenario)
            try:
                text = session.agent.next_message(view)
            except GatewayError as exc:
                logger.warning("agent provider failure in %s: %s", session.token, exc)
                raise
            before = len(session.state.turns)
            self.apply_turn(session, session.agent_side, text)
            produced.extend(t.to_dict() for t in session.state.turns[before:])
        return produced


# ---------------------------------------------------------------------------
# FastAPI application


class CreateSessionBody(BaseModel):
    scenario_id: str
    human_role: str
    agent_player_id: str
    first_mover: str = "random"  # "human" | "agent" | "random"


class ConsentBody(BaseModel):
    accepted: bool = True
    demographics: dict[str, Any] | None = None


class MessageBody(BaseModel):
    text: str


def _visible_state(session: HumanSession, scenario: Scenario) -> dict:
    """Everything the human client may see; agent-private context stays server-side."""
    state = session.state
    payload: dict[str, Any] = {
        "token": session.token,
        "scenario_id": session.scenario_id,
        "human_role": scenario.role_names()[session.human_side - 1],
        "human_side": session.human_side,
        "consent_accepted": session.consent_accepted,
        "phase": state.phase,
        "round_index": state.round_index if state.phase != "closed" else None,
        "round_limit": state.round_limit,
        "your_turn": state.phase != "closed" and state.to_move == session.human_side,
        "transcript": [t.to_dict() for t in state.turns],
        "pending_terms": state.pending_terms
        if state.phase == "awaiting_confirmation" else None,
        "pending_from_you": state.pending_side == session.human_side
        if state.phase == "awaiting_confirmation" else None,
        "termination": state.termination,
        "issues": [
            {
                "name": issue.name,
                "kind": issue.kind,
                "options": list(issue.options) or None,
                "lower": issue.lower if issue.kind == "continuous" else issue.bonus_lower,
                "upper": issue.upper if issue.kind == "continuous" else issue.bonus_upper,
            }
            for issue in scenario.issues
        ],
    }
    if state.phase == "closed":
        record = finalize(state, scenario)
        human_role = scenario.role_names()[session.human_side - 1]
        payload["closure"] = {
            "termination": record.termination,
            "verified_agreement": record.verified_agreement,
            "your_terms": record.session.final_terms.get(str(session.human_side)),
            "your_utility": record.utilities.get(human_role),
            "your_surplus": record.surpluses.get(human_role),
        }
    return payload


def create_app(store: SessionStore) -> FastAPI:
    app = FastAPI(title="parley arena session API")
    # the browser client may be hosted separately from the API; tokens are
    # capability URLs and no cookies exist, so open CORS is safe here
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["Content-Type"],
    )

    @app.middleware("http")
    async def add_schema_header(request, call_next):
        response: Response = await call_next(request)
        response.headers[SCHEMA_HEADER] = SCHEMA_VERSION
        return response

    def _session_or_404(token: str) -> HumanSession:
        try:
            return store.get(token)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session token") from None

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        try:
            session = store.create_session(
                body.scenario_id, body.human_role, body.agent_player_id, body.first_mover)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        scenario = store.scenarios[session.scenario_id]
        human_role = scenario.role_names()[session.human_side - 1]
        return {
            "token": session.token,
            "role": human_role,
            "role_brief": render_role_brief(scenario, human_role),
            "round_limit": scenario.round_limit,
            "first_mover_side": session.state.first_mover,
            "your_side": session.human_side,
        }

    @app.post("/sessions/{token}/consent")
    def submit_consent(token: str, body: ConsentBody):
        session = _session_or_404(token)
        if not body.accepted:
            raise HTTPException(status_code=409, detail="consent declined; session unusable")
        with session.lock:
            store.record_consent(token, body.demographics)
            scenario = store.scenarios[session.scenario_id]
            agent_turns = []
            if session.state.to_move == session.agent_side:
                agent_turns = store.agent_turns(session, scenario)
        return {"ok": True, "agent_turns": agent_turns}

    @app.post("/sessions/{token}/messages")
    def post_message(token: str, body: MessageBody):
        session = _session_or_404(token)
        with session.lock:
            if not session.consent_accepted:
                raise HTTPException(status_code=409, detail="consent-required")
            if session.state.phase == "closed":
                raise HTTPException(status_code=410, detail="session closed")
            scenario = store.scenarios[session.scenario_id]
            try:
                store.apply_turn(session, session.human_side, body.text)
            except OutOfTurnError:
                raise HTTPException(status_code=409, detail="out of turn") from None
            except SessionClosedError:
                raise HTTPException(status_code=410, detail="session closed") from None
            agent_turns = []
            if session.state.phase != "closed":
                agent_turns = store.agent_turns(session, scenario)
            return {
                "agent_turns": agent_turns,
                "state": _visible_state(session, scenario),
            }

    @app.get("/sessions/{token}")
    def get_state(token: str):
        session = _session_or_404(token)
        scenario = store.scenarios[session.scenario_id]
        return _visible_state(session, scenario)

    return app
