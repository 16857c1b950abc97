/**
 * Handshake contract: every message body this client composes must parse to
 * the intended control event in the backend's own parser. Bodies are piped
 * through the Python parser in a subprocess and the classified variants
 * compared, covering the three control tokens plus a structured proposal.
 */

import { spawnSync } from "node:child_process";
import { describe, expect, it } from "vitest";

import {
  DEAL_FAILED,
  DEAL_MISUNDERSTANDING,
  DEAL_REACHED,
  buildAcceptBody,
  buildProposalBody,
  mismatchBody,
  walkAwayBody,
} from "../src/tokens.js";
import type { Terms } from "../src/types.js";

const PARSER_SCRIPT = `
import sys, json
from parley.protocol import parse_control_tokens, canonical_terms
for line in sys.stdin:
    case = json.loads(line)
    event = parse_control_tokens(case["text"], pending_terms=case.get("pending"))
    out = {"kind": event.kind, "strict": bool(event.strict)}
    if event.terms is not None:
        out["canonical"] = canonical_terms(event.terms)
    print(json.dumps(out))
`;

interface ParsedEvent {
  kind: string;
  strict: boolean;
  canonical?: Record<string, unknown>;
}

function parseWithBackend(cases: Array<{ text: string; pending?: Terms }>): ParsedEvent[] {
  const input = cases.map((item) => JSON.stringify(item)).join("\n") + "\n";
  const result = spawnSync("python3", ["-c", PARSER_SCRIPT], {
    input,
    encoding: "utf-8",
    cwd: "..",
  });
  expect(result.status, result.stderr).toBe(0);
  return result.stdout
    .trim()
    .split("\n")
    .map((line) => JSON.parse(line) as ParsedEvent);
}

describe("control-token contract with the backend parser", () => {
  it("classifies every UI-emitted body as the intended variant", () => {
    const structured: Terms = { salary: 150, location: "A", bonus: 10 };
    const pending: Terms = { price: 136, total_value_of_deal_to_me: 16 };

    const [proposal, withValue, accept, mismatch, walk, plain] = parseWithBackend([
      { text: buildProposalBody(structured) },
      { text: buildProposalBody({ price: 140 }, 10) },
      { text: buildAcceptBody(pending, 14), pending },
      { text: mismatchBody(), pending },
      { text: walkAwayBody() },
      { text: "I can go to 140 if you cover the transfer fee." },
    ]);

    expect(proposal!.kind).toBe("proposal");
    expect(proposal!.strict).toBe(true);
    expect(proposal!.canonical).toEqual({ salary: 150, location: "a", bonus: 10 });

    expect(withValue!.kind).toBe("proposal");
    expect(withValue!.canonical).toEqual({ price: 140 }); // valuation key excluded

    expect(accept!.kind).toBe("confirm"); // identical terms against the pending proposal
    expect(accept!.strict).toBe(true);
    expect(accept!.canonical).toEqual({ price: 136 });

    expect(mismatch!.kind).toBe("misunderstanding");
    expect(walk!.kind).toBe("failed");
    expect(plain!.kind).toBe("message");
  });

  it("emits the token strings bit-exactly", () => {
    expect(DEAL_REACHED).toBe("$DEAL_REACHED$");
    expect(DEAL_MISUNDERSTANDING).toBe("$DEAL_MISUNDERSTANDING$");
    expect(DEAL_FAILED).toBe("$DEAL_FAILED$");
    expect(buildProposalBody({ price: 1 }).startsWith("$DEAL_REACHED$ {")).toBe(true);
  });

  it("accept bodies strip only private valuation fields", () => {
    const pending: Terms = {
      price: 136,
      total_value_of_deal_to_me: 16,
      expected_value_of_deal_to_me_in_millions: 1,
    };
    const body = buildAcceptBody(pending);
    expect(body).toBe('$DEAL_REACHED$ {"price":136}');
  });

  it("boolean and string values survive the round trip", () => {
    const terms: Terms = { rotation: true, start: "Aug 1", base: 140000 };
    const [event] = parseWithBackend([{ text: buildProposalBody(terms) }]);
    expect(event!.canonical).toEqual({ rotation: true, start: "aug 1", base: 140000 });
  });
});
