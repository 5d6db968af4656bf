// DOM layer of the console. Builds its widget tree under a root node
// and repaints from a SessionView; it holds no session state of its
// own beyond what is on screen.

import { guidanceEnabled, type SessionView } from "./state.js";
import type { StreamStatus } from "./api.js";
import { WorldView } from "./worldview.js";

export interface ConsoleCallbacks {
  onGuidance: (text: string) => void;
}

const CONNECTION_TEXT: Record<StreamStatus, string> = {
  connecting: "connecting to event stream",
  open: "",
  retrying: "connection lost, retrying",
  closed: "disconnected",
};

export class ConsolePage {
  readonly canvas: HTMLCanvasElement;
  private readonly sessionLabel: HTMLElement;
  private readonly stateBadge: HTMLElement;
  private readonly connectionBanner: HTMLElement;
  private readonly transcript: HTMLElement;
  private readonly failureBanner: HTMLElement;
  private readonly planLine: HTMLElement;
  private readonly input: HTMLInputElement;
  private readonly sendButton: HTMLButtonElement;
  private readonly hint: HTMLElement;
  private worldView: WorldView | null = null;

  constructor(
    root: HTMLElement,
    private readonly callbacks: ConsoleCallbacks,
  ) {
    root.innerHTML = `
      <header class="console-header">
        <span class="session-label"></span>
        <span class="state-badge"></span>
        <span class="conn-banner" hidden></span>
      </header>
      <div class="console-body">
        <div class="transcript" aria-live="polite"></div>
        <canvas class="world-canvas" width="420" height="420"></canvas>
      </div>
      <div class="plan-line" hidden></div>
      <div class="failure-banner" hidden></div>
      <form class="guidance-form">
        <input class="guidance-input" type="text"
               placeholder="tell the robot what to do" autocomplete="off">
        <button class="guidance-send" type="submit">send</button>
        <span class="guidance-hint"></span>
      </form>
    `;
    const pick = <T extends Element>(selector: string): T => {
      const el = root.querySelector(selector);
      if (!el) throw new Error(`missing element ${selector}`);
      return el as T;
    };
    this.sessionLabel = pick(".session-label");
    this.stateBadge = pick(".state-badge");
    this.connectionBanner = pick(".conn-banner");
    this.transcript = pick(".transcript");
    this.failureBanner = pick(".failure-banner");
    this.planLine = pick(".plan-line");
    this.input = pick(".guidance-input");
    this.sendButton = pick(".guidance-send");
    this.hint = pick(".guidance-hint");
    pick<HTMLFormElement>(".guidance-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
      this.submitGuidance();
    });
    this.canvas = pick(".world-canvas");
  }

  /** Lazily created so tests can render views without a 2D context. */
  private ensureWorldView(): WorldView | null {
    if (this.worldView) return this.worldView;
    try {
      this.worldView = new WorldView(this.canvas);
    } catch {
      return null;
    }
    return this.worldView;
  }

  private submitGuidance(): void {
    const text = this.input.value.trim();
    if (!text) {
      this.hint.textContent = "guidance must be non-empty";
      return;
    }
    this.hint.textContent = "";
    this.input.value = "";
    // lock the form right away; the next awaiting state re-enables it
    this.setInputEnabled(false);
    this.callbacks.onGuidance(text);
  }

  private setInputEnabled(enabled: boolean): void {
    this.input.disabled = !enabled;
    this.sendButton.disabled = !enabled;
  }

  renderView(view: SessionView): void {
    this.sessionLabel.textContent = `session ${view.id}`;
    this.stateBadge.textContent = view.state;
    this.stateBadge.className = `state-badge state-${view.state}`;

    this.renderTranscript(view);

    if (view.currentPlan) {
      this.planLine.hidden = false;
      this.planLine.textContent = `plan: ${view.currentPlan}`;
    } else {
      this.planLine.hidden = true;
      this.planLine.textContent = "";
    }

    if (view.lastFailure) {
      this.failureBanner.hidden = false;
      this.failureBanner.className = `failure-banner failure-${view.lastFailure.kind}`;
      this.failureBanner.textContent = `${view.lastFailure.kind}: ${view.lastFailure.explanation}`;
    } else {
      this.failureBanner.hidden = true;
      this.failureBanner.className = "failure-banner";
      this.failureBanner.textContent = "";
    }

    this.setInputEnabled(guidanceEnabled(view));
    this.input.placeholder = view.pendingGuidance
      ? "the robot needs guidance; tell it how to recover"
      : "tell the robot what to do";

    this.ensureWorldView()?.render(view.world);
  }

  private renderTranscript(view: SessionView): void {
    const doc = this.transcript.ownerDocument;
    this.transcript.textContent = "";
    for (const row of view.transcript) {
      const div = doc.createElement("div");
      div.dataset.seq = String(row.seq);
      if (row.kind === "turn") {
        div.className = "row row-turn";
        const speaker = doc.createElement("span");
        speaker.className = "speaker";
        speaker.textContent = row.speaker ?? "";
        const text = doc.createElement("span");
        text.className = "text";
        text.textContent = row.text;
        div.append(speaker, text);
      } else if (row.kind === "failure") {
        div.className = `row row-failure failure-${row.failureKind}`;
        div.textContent = `${row.failureKind}: ${row.text}`;
      } else {
        div.className = "row row-note";
        div.textContent = row.text;
      }
      this.transcript.appendChild(div);
    }
    this.transcript.scrollTop = this.transcript.scrollHeight;
  }

  setConnection(status: StreamStatus): void {
    const text = CONNECTION_TEXT[status];
    this.connectionBanner.hidden = text === "";
    this.connectionBanner.textContent = text;
    this.connectionBanner.className = `conn-banner conn-${status}`;
  }

  showError(text: string): void {
    this.hint.textContent = text;
  }
}
