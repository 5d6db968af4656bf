// @vitest-environment happy-dom

import { beforeEach, describe, expect, it } from "vitest";

import { ConsolePage } from "../src/ui.js";
import { initialView, reduce, type SessionView } from "../src/state.js";
import { ev, snapshot } from "./helpers.js";

let page: ConsolePage;
let root: HTMLElement;
let sent: string[];

function input(): HTMLInputElement {
  return root.querySelector(".guidance-input") as HTMLInputElement;
}

function submit(): void {
  const form = root.querySelector(".guidance-form") as HTMLFormElement;
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

function viewIn(state: SessionView["state"]): SessionView {
  return { ...initialView("s1"), state };
}

beforeEach(() => {
  document.body.innerHTML = '<div id="root"></div>';
  root = document.getElementById("root") as HTMLElement;
  sent = [];
  page = new ConsolePage(root, { onGuidance: (text) => sent.push(text) });
});

describe("guidance input", () => {
  it("is enabled only when the session accepts a user turn", () => {
    page.renderView(viewIn("planning"));
    expect(input().disabled).toBe(true);
    page.renderView(viewIn("executing"));
    expect(input().disabled).toBe(true);
    page.renderView(viewIn("awaiting_guidance"));
    expect(input().disabled).toBe(false);
    page.renderView(viewIn("exhausted"));
    expect(input().disabled).toBe(true);
    page.renderView(viewIn("done"));
    expect(input().disabled).toBe(false);
  });

  it("rejects empty guidance without calling out", () => {
    page.renderView(viewIn("awaiting_guidance"));
    input().value = "   ";
    submit();
    expect(sent).toEqual([]);
    const hint = root.querySelector(".guidance-hint") as HTMLElement;
    expect(hint.textContent).toContain("non-empty");
  });

  it("sends trimmed text and locks the form until the next awaiting state", () => {
    page.renderView(viewIn("awaiting_guidance"));
    input().value = "  the blue cup  ";
    submit();
    expect(sent).toEqual(["the blue cup"]);
    expect(input().value).toBe("");
    expect(input().disabled).toBe(true);
    page.renderView(viewIn("awaiting_guidance"));
    expect(input().disabled).toBe(false);
  });

  it("hints that guidance is wanted when the session is parked", () => {
    const parked = { ...viewIn("awaiting_guidance"), pendingGuidance: true };
    page.renderView(parked);
    expect(input().placeholder).toContain("guidance");
  });
});

describe("transcript", () => {
  it("shows rows in event order with literal speaker tokens", () => {
    let view = initialView("s1");
    view = reduce(view, ev(0, "session_started", { world: "apartment" }));
    view = reduce(view, ev(1, "user_input", { text: "fetch the coke" }));
    view = reduce(view, ev(2, "vision_feedback", { query: ["coke"], text: "coke is at table" }));
    view = reduce(view, ev(3, "backend_reply", { text: "PLAN: pick(coke)", round: 0 }));
    page.renderView(view);
    const rows = [...root.querySelectorAll(".transcript .row")];
    expect(rows.map((r) => (r as HTMLElement).dataset.seq)).toEqual(["0", "1", "2", "3"]);
    const speakers = [...root.querySelectorAll(".transcript .speaker")].map(
      (s) => s.textContent,
    );
    expect(speakers).toEqual(["<user>", "<vision>", "<robot>"]);
  });

  it("renders each failure kind with its own style", () => {
    let view = initialView("s1");
    view = reduce(view, ev(0, "failure", {
      kind: "feasibility",
      explanation: "cannot reach the 7up",
      subject: "7up",
      round: 0,
    }));
    page.renderView(view);
    const row = root.querySelector(".row-failure") as HTMLElement;
    expect(row.className).toContain("failure-feasibility");
    expect(row.textContent).toContain("feasibility");
    expect(row.textContent).toContain("cannot reach the 7up");
    const banner = root.querySelector(".failure-banner") as HTMLElement;
    expect(banner.hidden).toBe(false);
    expect(banner.className).toContain("failure-feasibility");
  });

  it("clears the failure banner after the next user turn", () => {
    let view = initialView("s1");
    view = reduce(view, ev(0, "failure", {
      kind: "vision",
      explanation: "cannot see the banana",
      subject: "banana",
      round: 0,
    }));
    page.renderView(view);
    view = reduce(view, ev(1, "user_input", { text: "it is in the cupboard" }));
    page.renderView(view);
    const banner = root.querySelector(".failure-banner") as HTMLElement;
    expect(banner.hidden).toBe(true);
  });
});

describe("status chrome", () => {
  it("shows the state badge and session id", () => {
    const view = { ...viewIn("executing"), id: "abc123" };
    page.renderView(view);
    const badge = root.querySelector(".state-badge") as HTMLElement;
    expect(badge.textContent).toBe("executing");
    expect(badge.className).toContain("state-executing");
    const label = root.querySelector(".session-label") as HTMLElement;
    expect(label.textContent).toContain("abc123");
  });

  it("shows the connection banner while degraded and hides it when open", () => {
    const banner = root.querySelector(".conn-banner") as HTMLElement;
    page.setConnection("retrying");
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("retrying");
    page.setConnection("open");
    expect(banner.hidden).toBe(true);
  });

  it("shows the current plan line while one is executing", () => {
    let view = initialView("s1");
    view = reduce(view, ev(0, "plan", { text: "PLAN: pick(coke)", round: 0 }));
    page.renderView(view);
    const plan = root.querySelector(".plan-line") as HTMLElement;
    expect(plan.hidden).toBe(false);
    expect(plan.textContent).toContain("PLAN: pick(coke)");
  });

  it("survives rendering a world without a canvas 2D context", () => {
    let view = initialView("s1");
    view = reduce(view, ev(0, "world", { snapshot: snapshot() }));
    expect(() => page.renderView(view)).not.toThrow();
  });
});
