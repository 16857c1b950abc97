"""Exercise the live human-vs-agent session API end to end, in process.

Same HTTP surface the web client uses: create a session, pass the consent
gate, chat against a scripted agent, and accept its proposal. Run the real
server with `parley serve --config <config.json>`.
"""

import json

from fastapi.testclient import TestClient

from parley.agents import AgentConfig
from parley.scenarios import builtin_scenario
from parley.service import SessionStore, create_app

store = SessionStore(
    scenarios={"toy-price": builtin_scenario("toy-price")},
    agent_configs={
        "seller-bot": AgentConfig(
            "scripted", "linear_concession",
            {"issue": "price", "start": 150, "floor": 130, "report_value": "exact"}),
    },
    seed=99,
)
client = TestClient(create_app(store))

created = client.post("/sessions", json={
    "scenario_id": "toy-price",
    "human_role": "buyer",
    "agent_player_id": "seller-bot",
    "first_mover": "agent",
}).json()
token = created["token"]
print(f"session {token[:8]}... created; you are the {created['role']}")
print("--- your private brief (first lines) ---")
print("\n".join(created["role_brief"].splitlines()[:5]))

# no turns before consent
blocked = client.post(f"/sessions/{token}/messages", json={"text": "hello?"})
print(f"\nmessage before consent -> HTTP {blocked.status_code} ({blocked.json()['detail']})")

consent = client.post(f"/sessions/{token}/consent",
                      json={"accepted": True, "demographics": {"experience": "a few instances"}})
print(f"consent recorded; agent opened with {len(consent.json()['agent_turns'])} turn(s)")

state = client.get(f"/sessions/{token}").json()
print(f"round {state['round_index']} of {state['round_limit']}; "
      f"pending terms from agent: {state['pending_terms']}")

reply = client.post(f"/sessions/{token}/messages",
                    json={"text": "That opener is steep. Meet me at 140 and we sign."})
pending = reply.json()["state"]["pending_terms"]
print(f"agent countered; pending now {pending}")

terms = {k: v for k, v in pending.items() if not k.endswith("_to_me")}
closing = client.post(f"/sessions/{token}/messages",
                      json={"text": "$DEAL_REACHED$ " + json.dumps(terms)})
closure = closing.json()["state"]["closure"]
print(f"\nsession closed: {closure['termination']} "
      f"(verified agreement = {closure['verified_agreement']})")
print(f"your terms: {closure['your_terms']}")
print(f"your utility {closure['your_utility']:g}, surplus {closure['your_surplus']:g}")
