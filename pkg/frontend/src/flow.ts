/**
 * Screen-flow controller: consent -> demographics (skippable) -> private brief
 * -> chat -> closure.
 *
 * Consent comes first and a decline never touches the network: the session is
 * created only after the participant accepts. State lives in memory only; the
 * transcript is never persisted client-side.
 */

import { ArenaClient } from "./api.js";
import { buildAcceptBody, buildProposalBody, mismatchBody, walkAwayBody } from "./tokens.js";
import type { CreateSessionRequest, CreatedSession, SessionView, Terms } from "./types.js";

export type Screen = "consent" | "declined" | "demographics" | "brief" | "chat" | "closed";

export class FlowError extends Error {}

export class SessionFlow {
  screen: Screen = "consent";
  created: CreatedSession | null = null;
  view: SessionView | null = null;

  constructor(
    readonly client: ArenaClient,
    readonly params: CreateSessionRequest,
  ) {}

  /** Decline on the consent screen: no session is ever created. */
  declineConsent(): void {
    this.requireScreen("consent");
    this.screen = "declined";
  }

  acceptConsent(): void {
    this.requireScreen("consent");
    this.screen = "demographics";
  }

  async submitDemographics(answers: Record<string, string>): Promise<void> {
    await this.startSession(answers);
  }

  async skipDemographics(): Promise<void> {
    await this.startSession(undefined);
  }

  private async startSession(demographics?: Record<string, string>): Promise<void> {
    this.requireScreen("demographics");
    this.created = await this.client.createSession(this.params);
    await this.client.submitConsent(this.created.token, demographics);
    this.view = await this.client.getState(this.created.token);
    this.screen = "brief";
  }

  async beginChat(): Promise<void> {
    this.requireScreen("brief");
    await this.refresh();
    this.screen = this.view?.phase === "closed" ? "closed" : "chat";
  }

  async refresh(): Promise<SessionView> {
    if (!this.created) throw new FlowError("no session yet");
    this.view = await this.client.getState(this.created.token);
    if (this.view.phase === "closed" && this.screen === "chat") {
      this.screen = "closed";
    }
    return this.view;
  }

  /** Free-text chat message. */
  async sendMessage(text: string): Promise<SessionView> {
    this.requireScreen("chat");
    if (!this.created) throw new FlowError("no session yet");
    const result = await this.client.postMessage(this.created.token, text);
    this.view = result.state;
    if (this.view.phase === "closed") {
      this.screen = "closed";
    }
    return this.view;
  }

  /** Structured proposal: the form builds the JSON so humans cannot mistype it. */
  proposeDeal(terms: Terms, selfValuation?: number): Promise<SessionView> {
    return this.sendMessage(buildProposalBody(terms, selfValuation));
  }

  /** Accept the agent's pending proposal with identical terms. */
  acceptPending(selfValuation?: number): Promise<SessionView> {
    const pending = this.pendingFromAgent();
    if (!pending) throw new FlowError("no pending proposal from the agent");
    return this.sendMessage(buildAcceptBody(pending, selfValuation));
  }

  /** The pending terms do not match your understanding. */
  declareMismatch(): Promise<SessionView> {
    if (!this.pendingFromAgent()) throw new FlowError("nothing pending to dispute");
    return this.sendMessage(mismatchBody());
  }

  walkAway(): Promise<SessionView> {
    return this.sendMessage(walkAwayBody());
  }

  pendingFromAgent(): Terms | null {
    if (!this.view || this.view.pending_terms === null) return null;
    return this.view.pending_from_you ? null : this.view.pending_terms;
  }

  /** "Round 4 of 6" from a half-round index like "4.1". */
  roundCounter(): string {
    if (!this.view || this.view.round_index === null) return "";
    const major = this.view.round_index.split(".")[0];
    return `Round ${major} of ${this.view.round_limit}`;
  }

  private requireScreen(expected: Screen): void {
    if (this.screen !== expected) {
      throw new FlowError(`expected screen ${expected}, currently on ${this.screen}`);
    }
  }
}
