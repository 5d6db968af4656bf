// Entry point: connect form on top, one live session below it.

import {
  ApiError,
  EventStream,
  HttpClient,
  type SocketFactory,
} from "./api.js";
import type { ServerEvent } from "./events.js";
import {
  SequenceGapError,
  initialView,
  reduce,
  refreshFromStatus,
  type SessionView,
} from "./state.js";
import { ConsolePage } from "./ui.js";

export interface ControllerOptions {
  socketFactory?: SocketFactory;
  retryDelayMs?: number;
}

export class ConsoleController {
  private view: SessionView;
  private stream: EventStream | null = null;
  private readonly page: ConsolePage;

  constructor(
    private readonly client: HttpClient,
    private readonly baseUrl: string,
    root: HTMLElement,
    private readonly options: ControllerOptions = {},
  ) {
    this.view = initialView("");
    this.page = new ConsolePage(root, {
      onGuidance: (text) => void this.sendGuidance(text),
    });
  }

  currentView(): SessionView {
    return this.view;
  }

  disconnect(): void {
    this.stream?.stop();
    this.stream = null;
  }

  async connect(world: string): Promise<void> {
    const opened = await this.client.createSession({ world });
    this.view = initialView(opened.id);
    this.page.renderView(this.view);
    this.stream = new EventStream(this.baseUrl, opened.id, {
      onEvent: (event) => this.onEvent(event),
      onStatus: (status) => {
        this.page.setConnection(status);
        // a drop may have raced a round; re-sync the snapshot fields
        if (status === "open" && this.view.lastSeq >= 0) {
          void this.resync();
        }
      },
      socketFactory: this.options.socketFactory,
      retryDelayMs: this.options.retryDelayMs,
    });
    this.stream.start();
  }

  private async resync(): Promise<void> {
    try {
      const status = await this.client.getSession(this.view.id);
      this.view = refreshFromStatus(this.view, status);
      this.page.renderView(this.view);
    } catch {
      // next event replay will repaint anyway
    }
  }

  private onEvent(event: ServerEvent): void {
    try {
      this.view = reduce(this.view, event);
    } catch (err) {
      if (err instanceof SequenceGapError) {
        // never render out of order; rebuild from the full replay
        this.view = initialView(this.view.id);
        this.stream?.stop();
        this.stream = null;
        void this.connectStreamFromScratch();
        return;
      }
      throw err;
    }
    this.page.renderView(this.view);
  }

  private async connectStreamFromScratch(): Promise<void> {
    this.stream = new EventStream(this.baseUrl, this.view.id, {
      onEvent: (event) => this.onEvent(event),
      onStatus: (status) => this.page.setConnection(status),
      socketFactory: this.options.socketFactory,
      retryDelayMs: this.options.retryDelayMs,
    });
    this.stream.start();
  }

  private async sendGuidance(text: string): Promise<void> {
    try {
      await this.client.sendMessage(this.view.id, text);
    } catch (err) {
      if (err instanceof ApiError) {
        this.page.showError(err.message);
        this.page.renderView(this.view);
        return;
      }
      this.page.showError("request failed; is the service up?");
      this.page.renderView(this.view);
    }
  }
}

function bootstrap(): void {
  const form = document.getElementById("connect-form") as HTMLFormElement;
  const urlInput = document.getElementById("base-url") as HTMLInputElement;
  const worldSelect = document.getElementById("world-select") as HTMLSelectElement;
  const mount = document.getElementById("console") as HTMLElement;

  urlInput.value = `${window.location.protocol}//${window.location.hostname}:8000`;

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const baseUrl = urlInput.value.trim();
    if (!baseUrl) return;
    const client = new HttpClient(baseUrl);
    const controller = new ConsoleController(client, baseUrl, mount);
    void controller.connect(worldSelect.value || "apartment");
  });

  // best effort world list; the default stays usable if this fails
  const probe = new HttpClient(urlInput.value);
  probe
    .listWorlds()
    .then((worlds) => {
      worldSelect.textContent = "";
      for (const name of worlds) {
        const option = document.createElement("option");
        option.value = name;
        option.textContent = name;
        worldSelect.appendChild(option);
      }
    })
    .catch(() => undefined);
}

if (typeof document !== "undefined" && document.getElementById("connect-form")) {
  bootstrap();
}
