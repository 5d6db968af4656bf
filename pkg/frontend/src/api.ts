// HTTP + WebSocket access to the plan loop service. The socket
// constructor is injectable so tests can run without a browser.

import type { ServerEvent, SessionState, SessionStatus } from "./events.js";

export interface SessionOpened {
  id: string;
  state: SessionState;
}

export interface MessageResult {
  id: string;
  state: SessionState;
  events: ServerEvent[];
}

export interface CreateSessionOptions {
  world?: string;
  backend?: string;
  remote_url?: string;
  parse_mode?: string;
  max_recovery_rounds?: number;
  time_out?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function detailOf(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `${response.status} ${response.statusText}`;
}

export class HttpClient {
  private readonly base: string;

  constructor(
    baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response));
    }
    return response;
  }

  private async postJson(path: string, body: unknown): Promise<Response> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async listWorlds(): Promise<string[]> {
    const response = await this.request("/worlds");
    const body = await response.json();
    return body.worlds;
  }

  async createSession(options: CreateSessionOptions = {}): Promise<SessionOpened> {
    const response = await this.postJson("/sessions", options);
    return response.json();
  }

  async getSession(id: string): Promise<SessionStatus> {
    const response = await this.request(`/sessions/${id}`);
    return response.json();
  }

  async sendMessage(id: string, text: string): Promise<MessageResult> {
    const response = await this.postJson(`/sessions/${id}/message`, { text });
    return response.json();
  }

  async deleteSession(id: string): Promise<void> {
    await this.request(`/sessions/${id}`, { method: "DELETE" });
  }
}

// The slice of the WebSocket interface the stream actually uses.
export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export type StreamStatus = "connecting" | "open" | "retrying" | "closed";

export interface EventStreamOptions {
  onEvent: (event: ServerEvent) => void;
  onStatus?: (status: StreamStatus) => void;
  socketFactory?: SocketFactory;
  retryDelayMs?: number;
}

export function eventsUrl(baseUrl: string, sessionId: string, after: number): string {
  const ws = baseUrl.replace(/\/+$/, "").replace(/^http/, "ws");
  return `${ws}/sessions/${sessionId}/events?after=${after}`;
}

/** Subscribes to a session's event stream and keeps it alive.
 *
 * Tracks the last delivered sequence number; on reconnect the server
 * replays everything after that cursor, so the consumer never misses
 * or repeats an event across connection drops.
 */
export class EventStream {
  private socket: SocketLike | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private readonly socketFactory: SocketFactory;
  private readonly retryDelayMs: number;

  lastSeq = -1;

  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly options: EventStreamOptions,
  ) {
    this.socketFactory =
      options.socketFactory ?? ((url) => new WebSocket(url) as SocketLike);
    this.retryDelayMs = options.retryDelayMs ?? 1000;
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    if (this.socket) {
      const socket = this.socket;
      this.socket = null;
      socket.onclose = null;
      socket.close();
    }
    this.setStatus("closed");
  }

  private setStatus(status: StreamStatus): void {
    this.options.onStatus?.(status);
  }

  private connect(): void {
    this.setStatus("connecting");
    const socket = this.socketFactory(
      eventsUrl(this.baseUrl, this.sessionId, this.lastSeq),
    );
    this.socket = socket;
    socket.onopen = () => this.setStatus("open");
    socket.onmessage = (ev) => this.handleMessage(ev.data);
    socket.onerror = () => {
      // the close handler owns retry; nothing to do here
    };
    socket.onclose = () => {
      this.socket = null;
      if (!this.stopped) this.scheduleRetry();
    };
  }

  private handleMessage(data: unknown): void {
    let event: ServerEvent;
    try {
      event = JSON.parse(String(data));
    } catch {
      return;
    }
    if (typeof event.seq !== "number") return;
    // replays can overlap the cursor; drop anything already delivered
    if (event.seq <= this.lastSeq) return;
    this.lastSeq = event.seq;
    this.options.onEvent(event);
  }

  private scheduleRetry(): void {
    this.setStatus("retrying");
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      if (!this.stopped) this.connect();
    }, this.retryDelayMs);
  }
}
