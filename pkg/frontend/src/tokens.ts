/**
 * Control-token message bodies. The token strings are bit-exact contract with
 * the arena protocol parser; a structured form builds the JSON so humans never
 * type it by hand.
 */

import type { Terms } from "./types.js";

export const DEAL_REACHED = "$DEAL_REACHED$";
export const DEAL_MISUNDERSTANDING = "$DEAL_MISUNDERSTANDING$";
export const DEAL_FAILED = "$DEAL_FAILED$";

export const VALUE_KEY = "total_value_of_deal_to_me";

export function isValuationKey(key: string): boolean {
  return key.endsWith("_to_me") || key.includes("_to_me_");
}

/** Proposal body from structured form values, with an optional self-valuation. */
export function buildProposalBody(terms: Terms, selfValuation?: number): string {
  const payload: Terms = { ...terms };
  if (selfValuation !== undefined) {
    payload[VALUE_KEY] = selfValuation;
  }
  return `${DEAL_REACHED} ${JSON.stringify(payload)}`;
}

/**
 * Confirmation body for a pending proposal: the identical terms JSON, minus
 * the proposer's own private valuation fields.
 */
export function buildAcceptBody(pendingTerms: Terms, selfValuation?: number): string {
  const terms: Terms = {};
  for (const [key, value] of Object.entries(pendingTerms)) {
    if (!isValuationKey(key)) {
      terms[key] = value;
    }
  }
  return buildProposalBody(terms, selfValuation);
}

export function mismatchBody(): string {
  return DEAL_MISUNDERSTANDING;
}

export function walkAwayBody(): string {
  return DEAL_FAILED;
}
