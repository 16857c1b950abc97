"""Drive one negotiation session by hand through the turn protocol.

Shows the half-round labels, the deal handshake (propose, counter, confirm),
and how a closed session is scored into an episode record.
"""

import json

from parley.protocol import Participant, advance, finalize, new_session
from parley.scenarios import builtin_scenario

price = builtin_scenario("toy-price")
state = new_session(
    price,
    Participant(role="buyer", policy_id="human-demo", first_mover=True),
    Participant(role="seller", policy_id="bot-demo", first_mover=False),
)

script = [
    "Hi - the listing mentioned flexibility. I can move fast at 125.",
    "Fast helps, but 125 is below what works for me. I need 140.",
    '$DEAL_REACHED$ {"price": 131, "total_value_of_deal_to_me": 19}',
    '$DEAL_REACHED$ {"price": 136, "total_value_of_deal_to_me": 16}',   # counter-proposal
    '$DEAL_REACHED$ {"price": 136, "total_value_of_deal_to_me": 14}',   # confirmation
]

for text in script:
    side = state.to_move
    state = advance(state, side, text)
    turn = state.turns[-1]
    print(f"[{len(state.turns)}] round {turn.round_label} side {side}: "
          f"{turn.control.kind:<10} phase={state.phase}")

print(f"\ntermination: {state.termination}")
record = finalize(state, price, episode_id="demo-001")
print(f"verified agreement: {record.verified_agreement}")
print(f"agreed terms: {record.outcome}")
print(f"utilities {record.utilities} surpluses {record.surpluses}")
print(f"shares {({k: round(v, 3) for k, v in record.shares.items()})}")
print(f"self-reported values per side: {record.self_valuations}")
print(f"strict-output validity per side: {record.validity}")

print("\nepisode record round-trips losslessly through JSON:")
print(record.to_json()[:160] + " ...")
clone = json.loads(record.to_json())
print("turns persisted:", len(clone["session"]["turns"]))
