/** Entry point: wire the flow controller and renderer to the page. */

import { ArenaClient } from "./api.js";
import { SessionFlow } from "./flow.js";
import { SessionUi } from "./ui.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

document.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("app");
  if (!root) return;
  const client = new ArenaClient(param("api", window.location.origin));
  const flow = new SessionFlow(client, {
    scenario_id: param("scenario", "toy-price"),
    human_role: param("role", "buyer"),
    agent_player_id: param("agent", "seller-bot"),
    first_mover: (param("first_mover", "random") as "human" | "agent" | "random"),
  });
  const ui = new SessionUi(flow, root);
  ui.render();
});
