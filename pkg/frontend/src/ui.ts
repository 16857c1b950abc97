/**
 * Framework-free DOM rendering for the session flow. Renders only fields the
 * API returned; the agent side's private context never reaches this client.
 */

import { FlowError, SessionFlow } from "./flow.js";
import type { IssueSpecView, Terms, TurnView } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, id: string, onClick: () => void): HTMLButtonElement {
  const node = el("button", { id, type: "button" }, label);
  node.addEventListener("click", onClick);
  return node;
}

export class SessionUi {
  constructor(
    readonly flow: SessionFlow,
    readonly root: HTMLElement,
    readonly onError: (message: string) => void = (message) => {
      const banner = this.root.querySelector("#error-banner");
      if (banner) banner.textContent = message;
    },
  ) {}

  render(): void {
    this.root.replaceChildren();
    this.root.appendChild(el("div", { id: "error-banner", class: "error" }));
    switch (this.flow.screen) {
      case "consent":
        this.renderConsent();
        break;
      case "declined":
        this.root.appendChild(el("p", { id: "declined-note" },
          "You declined to participate. No session was created and nothing was recorded."));
        break;
      case "demographics":
        this.renderDemographics();
        break;
      case "brief":
        this.renderBrief();
        break;
      case "chat":
        this.renderChat();
        break;
      case "closed":
        this.renderClosure();
        break;
    }
  }

  private act(action: () => Promise<unknown>): void {
    // single in-flight request: controls are rebuilt only after the reply
    void action()
      .catch((error) => {
        if (error instanceof FlowError) {
          this.onError(error.message);
        } else if (error instanceof Error) {
          this.onError(error.message);
        } else {
          this.onError(String(error));
        }
      })
      .finally(() => this.render());
  }

  private renderConsent(): void {
    this.root.appendChild(el("h1", {}, "Negotiation study"));
    this.root.appendChild(el("p", { id: "consent-text" },
      "You are invited to take part in a live negotiation exercise against an AI " +
      "counterpart. Participation is voluntary; the de-identified transcript is " +
      "recorded for research. Demographics are optional. You may stop at any time."));
    this.root.appendChild(button("I agree to participate", "consent-accept", () => {
      this.flow.acceptConsent();
      this.render();
    }));
    this.root.appendChild(button("I decline", "consent-decline", () => {
      this.flow.declineConsent();
      this.render();
    }));
  }

  private renderDemographics(): void {
    this.root.appendChild(el("h2", {}, "About you (optional)"));
    const form = el("form", { id: "demographics-form" });
    for (const field of ["program", "negotiation_experience"]) {
      const label = el("label", { for: `demo-${field}` }, field.replace("_", " "));
      form.appendChild(label);
      form.appendChild(el("input", { id: `demo-${field}`, name: field, type: "text" }));
    }
    this.root.appendChild(form);
    this.root.appendChild(button("Continue", "demographics-submit", () => {
      const answers: Record<string, string> = {};
      for (const input of Array.from(form.querySelectorAll("input"))) {
        if (input.value) answers[input.name] = input.value;
      }
      this.act(() => Object.keys(answers).length
        ? this.flow.submitDemographics(answers)
        : this.flow.skipDemographics());
    }));
    this.root.appendChild(button("Skip", "demographics-skip", () => {
      this.act(() => this.flow.skipDemographics());
    }));
  }

  private renderBrief(): void {
    const created = this.flow.created;
    if (!created) return;
    this.root.appendChild(el("h2", {}, `Your role: ${created.role}`));
    this.root.appendChild(el("pre", { id: "role-brief" }, created.role_brief));
    this.root.appendChild(button("Start negotiating", "begin-chat", () => {
      this.act(() => this.flow.beginChat());
    }));
  }

  private renderTranscript(turns: TurnView[], humanSide: number): HTMLElement {
    const list = el("ol", { id: "transcript" });
    for (const turn of turns) {
      const who = turn.side === humanSide ? "You" : "Agent";
      list.appendChild(el("li", { "data-side": String(turn.side) },
        `[${turn.round}] ${who}: ${turn.raw_text}`));
    }
    return list;
  }

  private renderProposalForm(issues: IssueSpecView[]): void {
    const form = el("form", { id: "proposal-form" });
    form.appendChild(el("h3", {}, "Propose a deal"));
    for (const issue of issues) {
      form.appendChild(el("label", { for: `issue-${issue.name}` }, issue.name));
      if (issue.kind === "categorical" && issue.options) {
        const select = el("select", { id: `issue-${issue.name}`, "data-issue": issue.name });
        for (const option of issue.options) {
          select.appendChild(el("option", { value: option }, option));
        }
        form.appendChild(select);
      } else if (issue.kind === "boolean") {
        form.appendChild(el("input", {
          id: `issue-${issue.name}`, "data-issue": issue.name, type: "checkbox",
        }));
      } else {
        form.appendChild(el("input", {
          id: `issue-${issue.name}`, "data-issue": issue.name, type: "number",
          min: String(issue.lower ?? ""), max: String(issue.upper ?? ""), step: "any",
        }));
      }
    }
    this.root.appendChild(form);
    this.root.appendChild(button("Send proposal", "send-proposal", () => {
      this.act(() => this.flow.proposeDeal(this.collectProposal(form, issues)));
    }));
  }

  collectProposal(form: HTMLFormElement, issues: IssueSpecView[]): Terms {
    const terms: Terms = {};
    for (const issue of issues) {
      const control = form.querySelector(`[data-issue="${issue.name}"]`);
      if (!control) continue;
      if (issue.kind === "categorical") {
        terms[issue.name] = (control as HTMLSelectElement).value;
      } else if (issue.kind === "boolean") {
        terms[issue.name] = (control as HTMLInputElement).checked;
      } else {
        terms[issue.name] = Number((control as HTMLInputElement).value);
      }
    }
    return terms;
  }

  private renderChat(): void {
    const view = this.flow.view;
    if (!view) return;
    this.root.appendChild(el("h2", { id: "round-counter" }, this.flow.roundCounter()));
    this.root.appendChild(this.renderTranscript(view.transcript, view.human_side));

    const pending = this.flow.pendingFromAgent();
    if (pending) {
      const panel = el("div", { id: "pending-panel" });
      panel.appendChild(el("h3", {}, "The agent proposed these terms:"));
      const terms = el("ul", { id: "pending-terms" });
      for (const [key, value] of Object.entries(pending)) {
        if (!key.endsWith("_to_me")) {
          terms.appendChild(el("li", {}, `${key}: ${String(value)}`));
        }
      }
      panel.appendChild(terms);
      panel.appendChild(button("Accept these terms", "accept-pending", () => {
        this.act(() => this.flow.acceptPending());
      }));
      panel.appendChild(button("These don't match my understanding", "declare-mismatch", () => {
        this.act(() => this.flow.declareMismatch());
      }));
      this.root.appendChild(panel);
    }

    if (view.your_turn) {
      const input = el("textarea", { id: "message-input" });
      this.root.appendChild(input);
      this.root.appendChild(button("Send message", "send-message", () => {
        if (input.value.trim()) {
          this.act(() => this.flow.sendMessage(input.value));
        }
      }));
      this.renderProposalForm(view.issues);
      this.root.appendChild(button("Walk away (no deal possible)", "walk-away", () => {
        this.act(() => this.flow.walkAway());
      }));
    } else {
      this.root.appendChild(el("p", { id: "waiting" }, "Waiting for the agent..."));
      this.root.appendChild(button("Refresh", "refresh", () => {
        this.act(() => this.flow.refresh());
      }));
    }
  }

  private renderClosure(): void {
    const view = this.flow.view;
    const closure = view?.closure;
    this.root.appendChild(el("h2", {}, "Session complete"));
    if (view) {
      this.root.appendChild(this.renderTranscript(view.transcript, view.human_side));
    }
    if (closure) {
      this.root.appendChild(el("p", { id: "termination" }, `Outcome: ${closure.termination}`));
      if (closure.verified_agreement === 1 && closure.your_terms) {
        const terms = el("ul", { id: "your-terms" });
        for (const [key, value] of Object.entries(closure.your_terms)) {
          if (!key.endsWith("_to_me")) {
            terms.appendChild(el("li", {}, `${key}: ${String(value)}`));
          }
        }
        this.root.appendChild(el("p", {}, "Your agreed terms:"));
        this.root.appendChild(terms);
      }
      if (closure.your_utility !== null) {
        this.root.appendChild(el("p", { id: "your-utility" },
          `Your outcome value: ${closure.your_utility}`));
      }
    }
  }
}
