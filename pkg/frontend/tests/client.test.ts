import { describe, expect, it } from "vitest";

import { ClientTransports, StationClient, WebSocketLike } from "../src/client.js";
import { kvEncode } from "../src/kvlines.js";

class FakeSocket implements WebSocketLike {
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onopen: ((ev?: unknown) => void) | null = null;
  closed = false;
  close(): void {
    this.closed = true;
  }
}

interface Timer {
  fn: () => void;
  ms: number;
}

function makeHarness(responses: Record<string, { status: number; body: string }> = {}) {
  const sockets: FakeSocket[] = [];
  const timers: Timer[] = [];
  const transports: ClientTransports = {
    fetch: async (url) => {
      const path = new URL(url).pathname;
      const r = responses[path];
      if (!r) throw new Error(`unexpected fetch ${path}`);
      return { status: r.status, text: async () => r.body };
    },
    makeWebSocket: () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    setTimeout: (fn, ms) => {
      timers.push({ fn, ms });
      return timers.length - 1;
    },
    clearTimeout: () => {},
    now: () => 42,
  };
  return { sockets, timers, transports };
}

describe("connection lifecycle", () => {
  it("marks connected on open and applies the initial snapshot", () => {
    const { sockets, transports } = makeHarness();
    const client = new StationClient("http://station", transports);
    client.connect();
    expect(client.state.connection).toBe("connecting");
    sockets[0].onopen!();
    expect(client.state.connection).toBe("connected");
    sockets[0].onmessage!({
      data: kvEncode({ event: "snapshot", scenario: "tunnel-open", t: 1.5,
                       x: 1, y: 2, heading: 0, decision: "none",
                       coverage: 0, stuck: false, outcome: "running",
                       driver_busy: false, teleop_active: false }),
    });
    expect(client.state.scenario).toBe("tunnel-open");
    expect(client.state.pose).toEqual({ x: 1, y: 2, heading: 0 });
  });

  it("reconnects with exponential backoff after drops", () => {
    const { sockets, timers, transports } = makeHarness();
    const client = new StationClient("http://station", transports);
    client.connect();
    sockets[0].onopen!();
    sockets[0].onclose!();
    expect(client.state.connection).toBe("disconnected");
    expect(client.state.retryInSeconds).toBe(0.5);
    expect(timers).toHaveLength(1);
    timers[0].fn(); // retry fires -> second socket, fails before opening
    expect(sockets).toHaveLength(2);
    sockets[1].onclose!();
    expect(client.state.retryInSeconds).toBe(1.0); // doubled
    timers[1].fn();
    sockets[2].onopen!(); // success resets the backoff
    sockets[2].onclose!();
    expect(client.state.retryInSeconds).toBe(0.5);
  });

  it("stop() prevents further reconnects", () => {
    const { sockets, timers, transports } = makeHarness();
    const client = new StationClient("http://station", transports);
    client.connect();
    sockets[0].onopen!();
    client.stop();
    expect(sockets[0].closed).toBe(true);
    sockets[0].onclose!();
    expect(timers).toHaveLength(0);
  });
});

describe("sessions and commands", () => {
  it("creates a session then sends commands with it", async () => {
    const { transports } = makeHarness({
      "/api/session": { status: 200, body: "role=driver\nsession=abc123\n" },
      "/api/command": { status: 200, body: "status=accepted\n" },
    });
    const client = new StationClient("http://station", transports);
    expect(await client.createSession("driver")).toBe("abc123");
    const result = await client.sendCommand({ kind: "drive", vx: 0.5, vy: 0 });
    expect(result).toEqual({ accepted: true, reason: "" });
  });

  it("surfaces driver-slot conflicts", async () => {
    const { transports } = makeHarness({
      "/api/session": { status: 200, body: "role=driver\nsession=abc123\n" },
      "/api/command": {
        status: 409,
        body: "reason=conflict: another session holds the driver slot\nstatus=rejected\n",
      },
    });
    const client = new StationClient("http://station", transports);
    await client.createSession("driver");
    const result = await client.sendCommand({ kind: "drive", vx: 0.1, vy: 0 });
    expect(result.accepted).toBe(false);
    expect(result.reason).toContain("conflict");
  });

  it("refuses to command without a session", async () => {
    const { transports } = makeHarness();
    const client = new StationClient("http://station", transports);
    await expect(client.sendCommand({ kind: "stop" })).rejects.toThrow("no session");
  });
});
