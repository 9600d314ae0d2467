/**
 * Station client: snapshot + event stream + commands over the documented
 * HTTP/WebSocket endpoints, with automatic reconnect and backoff.
 *
 * Transports are injected so tests (and Node) can supply their own fetch
 * and WebSocket implementations.
 */

import { kvDecode, kvEncode } from "./kvlines.js";
import { Action, reduce } from "./reducer.js";
import { OperatorCommand, ViewState, initialViewState } from "./types.js";

export interface WebSocketLike {
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onopen: ((ev?: unknown) => void) | null;
  close(): void;
}

export interface ClientTransports {
  fetch: (url: string, init?: { method?: string; body?: string }) => Promise<{
    status: number;
    text(): Promise<string>;
  }>;
  makeWebSocket: (url: string) => WebSocketLike;
  /** setTimeout-compatible scheduler, injectable for tests. */
  setTimeout: (fn: () => void, ms: number) => unknown;
  clearTimeout: (handle: unknown) => void;
  now: () => number;
}

export interface CommandResult {
  accepted: boolean;
  reason: string;
}

const BACKOFF_INITIAL_S = 0.5;
const BACKOFF_MAX_S = 8;

export class StationClient {
  state: ViewState = initialViewState();
  onChange: ((state: ViewState) => void) | null = null;
  /** Raw server records, in arrival order (snapshot + events). */
  onRecord: ((record: Record<string, string>) => void) | null = null;

  private ws: WebSocketLike | null = null;
  private sessionId: string | null = null;
  private backoffS = BACKOFF_INITIAL_S;
  private retryHandle: unknown = null;
  private stopped = false;

  constructor(
    private readonly baseUrl: string,
    private readonly transports: ClientTransports,
  ) {}

  private get wsUrl(): string {
    return this.baseUrl.replace(/^http/, "ws") + "/api/events";
  }

  private dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    this.onChange?.(this.state);
  }

  /** Open the event stream; resolves once connected (or schedules retry). */
  connect(): void {
    if (this.stopped) return;
    this.dispatch({ type: "connecting" });
    let ws: WebSocketLike;
    try {
      ws = this.transports.makeWebSocket(this.wsUrl);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.backoffS = BACKOFF_INITIAL_S;
      this.dispatch({ type: "connected" });
    };
    ws.onmessage = (ev) => {
      const text = typeof ev.data === "string" ? ev.data : String(ev.data);
      // The first record after (re)connect is always a full snapshot, so a
      // dropped connection resyncs without any client-side replay logic.
      const record = kvDecode(text);
      this.onRecord?.(record);
      this.dispatch({
        type: "server-record",
        record,
        nowMs: this.transports.now(),
      });
    };
    ws.onerror = () => {
      /* onclose follows; status change happens there */
    };
    ws.onclose = () => {
      this.ws = null;
      if (!this.stopped) this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    const waitS = this.backoffS;
    this.backoffS = Math.min(this.backoffS * 2, BACKOFF_MAX_S);
    this.dispatch({ type: "disconnected", retryInSeconds: waitS });
    this.retryHandle = this.transports.setTimeout(() => this.connect(), waitS * 1000);
  }

  stop(): void {
    this.stopped = true;
    if (this.retryHandle !== null) this.transports.clearTimeout(this.retryHandle);
    this.ws?.close();
  }

  async createSession(role: "observer" | "driver"): Promise<string> {
    const res = await this.transports.fetch(`${this.baseUrl}/api/session`, {
      method: "POST",
      body: kvEncode({ role }),
    });
    const body = kvDecode(await res.text());
    if (res.status !== 200 || !body["session"]) {
      throw new Error(body["error"] ?? `session rejected (${res.status})`);
    }
    this.sessionId = body["session"];
    return this.sessionId;
  }

  async sendCommand(cmd: OperatorCommand): Promise<CommandResult> {
    if (this.sessionId === null) throw new Error("no session");
    const record: Record<string, string | number> = {
      session: this.sessionId,
      kind: cmd.kind,
    };
    if (cmd.vx !== undefined) record["vx"] = cmd.vx;
    if (cmd.vy !== undefined) record["vy"] = cmd.vy;
    if (cmd.x !== undefined) record["x"] = cmd.x;
    if (cmd.y !== undefined) record["y"] = cmd.y;
    const res = await this.transports.fetch(`${this.baseUrl}/api/command`, {
      method: "POST",
      body: kvEncode(record),
    });
    const body = kvDecode(await res.text());
    return {
      accepted: body["status"] === "accepted",
      reason: body["reason"] ?? "",
    };
  }

  /** Headless-mode helper: step the station's simulated clock. */
  async advance(dtSeconds: number): Promise<number> {
    const res = await this.transports.fetch(`${this.baseUrl}/api/advance`, {
      method: "POST",
      body: kvEncode({ dt: dtSeconds }),
    });
    const body = kvDecode(await res.text());
    return Number(body["t"]);
  }
}

/** Browser transports using the platform globals. */
export function browserTransports(): ClientTransports {
  return {
    fetch: (url, init) => fetch(url, init),
    makeWebSocket: (url) => new WebSocket(url) as unknown as WebSocketLike,
    setTimeout: (fn, ms) => setTimeout(fn, ms),
    clearTimeout: (h) => clearTimeout(h as number),
    now: () => Date.now(),
  };
}
