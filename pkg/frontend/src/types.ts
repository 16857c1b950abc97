/** Payload types mirroring the arena session API (schema version 1). */

export type TermValue = string | number | boolean;
export type Terms = Record<string, TermValue>;

export interface CreatedSession {
  token: string;
  role: string;
  role_brief: string;
  round_limit: number;
  first_mover_side: number;
  your_side: number;
}

export interface IssueSpecView {
  name: string;
  kind: "categorical" | "continuous" | "boolean" | "contingent";
  options: string[] | null;
  lower: number | null;
  upper: number | null;
}

export interface TurnView {
  round: string;
  side: number;
  raw_text: string;
  control: { kind: string; terms?: Terms; strict?: boolean; parse_error?: string };
}

export interface ClosureView {
  termination: string;
  verified_agreement: number;
  your_terms: Terms | null;
  your_utility: number | null;
  your_surplus: number | null;
}

export interface SessionView {
  token: string;
  scenario_id: string;
  human_role: string;
  human_side: number;
  consent_accepted: boolean;
  phase: "active" | "awaiting_confirmation" | "closed";
  round_index: string | null;
  round_limit: number;
  your_turn: boolean;
  transcript: TurnView[];
  pending_terms: Terms | null;
  pending_from_you: boolean | null;
  termination: string | null;
  issues: IssueSpecView[];
  closure?: ClosureView;
}

export interface MessageResult {
  agent_turns: TurnView[];
  state: SessionView;
}

export interface CreateSessionRequest {
  scenario_id: string;
  human_role: string;
  agent_player_id: string;
  first_mover?: "human" | "agent" | "random";
}
