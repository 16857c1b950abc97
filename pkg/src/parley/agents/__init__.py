"""Negotiator policies: deterministic scripted bots and chat-provider-backed agents.

An agent sees only its own side of a session (a ``SideView``) and returns the
raw text of its next turn. Scripted bots are pure functions of the view and
their parameters; provider-backed agents run in ``base`` mode (single call) or
``pro`` mode (private state tracking and round planning before each message).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol

from ..gateway import Provider, ProviderConfig
from ..protocol import SessionState, Turn
from ..scenarios import Scenario


class AgentConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    """One negotiator policy: scripted(name, params) or llm(model, mode, sampling)."""

    policy: str  # "scripted" | "llm"
    name: str    # bot name or provider model id
    params: dict[str, Any] = field(default_factory=dict)
    mode: str = "base"
    sampling: dict[str, Any] = field(default_factory=dict)
    provider: ProviderConfig | None = None

    def __post_init__(self):
        if self.policy not in ("scripted", "llm"):
            raise AgentConfigError(f"unknown policy {self.policy!r}")
        if self.mode not in ("base", "pro"):
            raise AgentConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "pro" and self.policy != "llm":
            raise AgentConfigError("mode=pro is only valid for llm policies")

    @staticmethod
    def from_dict(data: dict) -> "AgentConfig":
        provider = None
        if data.get("provider"):
            provider = ProviderConfig(**data["provider"])
        return AgentConfig(
            policy=data["policy"],
            name=data.get("name") or data.get("model", ""),
            params=dict(data.get("params", {})),
            mode=data.get("mode", "base"),
            sampling=dict(data.get("sampling", {})),
            provider=provider,
        )


@dataclass(frozen=True)
class SideView:
    """What one side can see when composing its next turn."""

    scenario: Scenario
    side: int
    role: str
    turns: tuple[Turn, ...]
    round_label: str
    pending_terms: dict[str, Any] | None
    round_limit: int

    @property
    def major_round(self) -> int:
        return int(self.round_label.split(".")[0])


def make_view(state: SessionState, scenario: Scenario) -> SideView:
    """View for the side currently holding the floor."""
    side = state.to_move
    if side is None:
        raise ValueError("session is closed")
    pending = None
    if state.phase == "awaiting_confirmation" and state.pending_side != side:
        pending = state.pending_terms
    return SideView(
        scenario=scenario,
        side=side,
        role=state.participant(side).role,
        turns=state.turns,
        round_label=state.round_index,
        pending_terms=pending,
        round_limit=state.round_limit,
    )


class Agent(Protocol):
    def next_message(self, view: SideView) -> str: ...


def render_transcript_view(view: SideView) -> str:
    if not view.turns:
        return "(no messages yet)"
    names = view.scenario.role_names()
    lines = []
    for index, turn in enumerate(view.turns, start=1):
        who = "You" if turn.side == view.side else names[turn.side - 1]
        lines.append(f"[{index}] Round {turn.round_label} - {who}:")
        lines.append(turn.raw_text)
        lines.append("")
    return "\n".join(lines).rstrip()


def render_role_brief(scenario: Scenario, role: str) -> str:
    """Private instructions for one role: values, BATNA, constraints, handshake."""
    spec = scenario.role(role)
    other = next(n for n in scenario.role_names() if n != role)
    lines = [
        f"You are negotiating as the {role} against the {other} in scenario '{scenario.id}'.",
        f"The negotiation lasts at most {scenario.round_limit} rounds (two messages per round).",
        "",
        "YOUR PRIVATE SCORING (do not reveal):",
        f"- Constant value: {spec.base_value:g} points.",
    ]
    for issue in scenario.issues:
        rule = issue.values[role]
        if issue.kind == "categorical":
            points = ", ".join(f"{opt}: {float(rule[opt]):+g}" for opt in issue.options)
            lines.append(f"- {issue.name} (choose one of {list(issue.options)}): {points}.")
        elif issue.kind == "continuous":
            lines.append(
                f"- {issue.name} (number in [{issue.lower:g}, {issue.upper:g}]): "
                f"{float(rule):+g} points per unit."
            )
        elif issue.kind == "boolean":
            lines.append(
                f"- {issue.name} (true/false): true {float(rule['true']):+g}, "
                f"false {float(rule['false']):+g} points."
            )
        else:
            lines.append(
                f"- {issue.name} (bonus in [{issue.bonus_lower:g}, {issue.bonus_upper:g}], "
                f"paid only if the contingency occurs): you believe the contingency has "
                f"probability {float(rule['belief']):g}, so each bonus unit is worth "
                f"{float(rule['belief']) * float(rule.get('coeff', 1.0)) + float(rule.get('linear', 0.0)):+g} "
                "points to you in expectation."
            )
    lines.append(f"- Your BATNA (walk-away value) is {spec.batna:g} points; never accept less.")
    for db in spec.deal_breakers:
        if db.values:
            lines.append(f"- DEAL-BREAKER: {db.issue} must never be {list(db.values)}.")
        if db.forbidden_range:
            lo, hi = db.forbidden_range
            lines.append(f"- DEAL-BREAKER: {db.issue} must never fall in [{lo:g}, {hi:g}].")
    for constraint in scenario.constraints:
        lines.append(f"- HARD CONSTRAINT: {constraint.description}")
    lines += [
        "",
        "PROTOCOL:",
        "- Exchange free-form messages; numbers and options must be explicit.",
        "- To propose or accept a final deal, send the token $DEAL_REACHED$ followed by a",
        "  JSON object assigning every issue, e.g.",
        f"  $DEAL_REACHED$ {{{', '.join(chr(34) + n + chr(34) + ': <value>' for n in scenario.issue_names())}, "
        '"total_value_of_deal_to_me": <your own total points>}',
        "- A deal closes only when the other side replies with $DEAL_REACHED$ and identical terms.",
        "- If their confirmation terms do not match your understanding, reply $DEAL_MISUNDERSTANDING$.",
        "- To walk away permanently, send $DEAL_FAILED$.",
        "- If no deal is confirmed within the round limit, both sides get their BATNA.",
    ]
    return "\n".join(lines)


def make_agent(config: AgentConfig, provider: Provider | None = None) -> Agent:
    """Instantiate a fresh agent for one episode side."""
    if config.policy == "scripted":
        from .scripted import make_scripted_agent

        return make_scripted_agent(config.name, config.params)
    from .llm import LlmAgent

    if provider is None:
        from ..gateway import HttpProvider

        if config.provider is None:
            raise AgentConfigError(f"llm agent {config.name!r} needs a provider")
        provider = HttpProvider(config.provider)
    return LlmAgent(config, provider)
