/**
 * Keyboard teleoperation with a hard command-rate cap.
 *
 * Held keys map to a world-frame velocity; the controller emits at most
 * `rateHz` drive commands per second no matter how fast the key events or
 * animation ticks arrive, so the duty-cycled radio link is never flooded.
 * Releasing all keys emits a single stop.
 */

import { OperatorCommand } from "./types.js";

const KEY_VECTORS: Record<string, { x: number; y: number }> = {
  ArrowRight: { x: 1, y: 0 },
  ArrowLeft: { x: -1, y: 0 },
  ArrowUp: { x: 0, y: 1 },
  ArrowDown: { x: 0, y: -1 },
  d: { x: 1, y: 0 },
  a: { x: -1, y: 0 },
  w: { x: 0, y: 1 },
  s: { x: 0, y: -1 },
};

export class TeleopController {
  private readonly held = new Set<string>();
  private lastSentMs = -Infinity;
  private stopPending = false;

  constructor(
    private readonly speed = 0.5,
    private readonly rateHz = 5,
  ) {}

  get minIntervalMs(): number {
    return 1000 / this.rateHz;
  }

  keyDown(key: string): void {
    if (key in KEY_VECTORS) this.held.add(key);
  }

  keyUp(key: string): void {
    if (!(key in KEY_VECTORS)) return;
    this.held.delete(key);
    if (this.held.size === 0) this.stopPending = true;
  }

  /** Current commanded velocity from the held-key set. */
  velocity(): { vx: number; vy: number } {
    let x = 0;
    let y = 0;
    for (const key of this.held) {
      x += KEY_VECTORS[key].x;
      y += KEY_VECTORS[key].y;
    }
    const norm = Math.hypot(x, y);
    if (norm < 1e-9) return { vx: 0, vy: 0 };
    return { vx: (x / norm) * this.speed, vy: (y / norm) * this.speed };
  }

  /**
   * Poll from the UI loop; returns the command to transmit now, or null.
   * Stop commands bypass the rate cap (they end transmission pressure, and
   * a sticking robot is a safety issue); drive commands never exceed it.
   */
  tick(nowMs: number): OperatorCommand | null {
    if (this.stopPending) {
      this.stopPending = false;
      this.lastSentMs = nowMs;
      return { kind: "stop" };
    }
    if (this.held.size === 0) return null;
    if (nowMs - this.lastSentMs < this.minIntervalMs) return null;
    this.lastSentMs = nowMs;
    const { vx, vy } = this.velocity();
    return { kind: "drive", vx, vy };
  }
}

/** A map click becomes a goto at the clicked world position. */
export function clickToGoto(world: { x: number; y: number }): OperatorCommand {
  return { kind: "goto", x: world.x, y: world.y };
}
