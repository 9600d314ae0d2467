import { describe, expect, it } from "vitest";

import { TeleopController, clickToGoto } from "../src/teleop.js";

describe("key mapping", () => {
  it("right arrow drives +x at the configured speed", () => {
    const t = new TeleopController(0.5, 5);
    t.keyDown("ArrowRight");
    const cmd = t.tick(0);
    expect(cmd).toEqual({ kind: "drive", vx: 0.5, vy: 0 });
  });

  it("wasd and arrows are equivalent; diagonals are normalized", () => {
    const t = new TeleopController(0.5, 5);
    t.keyDown("w");
    t.keyDown("d");
    const { vx, vy } = t.velocity();
    expect(Math.hypot(vx, vy)).toBeCloseTo(0.5);
    expect(vx).toBeCloseTo(vy);
  });

  it("opposing keys cancel", () => {
    const t = new TeleopController(0.5, 5);
    t.keyDown("a");
    t.keyDown("d");
    expect(t.velocity()).toEqual({ vx: 0, vy: 0 });
  });

  it("non-mapped keys are ignored", () => {
    const t = new TeleopController(0.5, 5);
    t.keyDown("q");
    expect(t.tick(0)).toBeNull();
  });
});

describe("command-rate cap", () => {
  it("a held key at 60 fps emits at most 5 drive commands per second", () => {
    const t = new TeleopController(0.5, 5);
    t.keyDown("ArrowRight");
    let count = 0;
    for (let ms = 0; ms <= 2000; ms += 16) {
      if (t.tick(ms)?.kind === "drive") count++;
    }
    expect(count).toBeLessThanOrEqual(11); // 5/s over 2s, + the initial send
    expect(count).toBeGreaterThanOrEqual(9); // and it keeps refreshing
  });

  it("release emits exactly one stop, immediately", () => {
    const t = new TeleopController(0.5, 5);
    t.keyDown("ArrowRight");
    t.tick(0);
    t.keyUp("ArrowRight");
    expect(t.tick(10)).toEqual({ kind: "stop" }); // bypasses the rate window
    expect(t.tick(11)).toBeNull();
  });

  it("re-press after release resumes driving", () => {
    const t = new TeleopController(0.5, 5);
    t.keyDown("w");
    t.tick(0);
    t.keyUp("w");
    t.tick(1);
    t.keyDown("s");
    expect(t.tick(300)?.kind).toBe("drive");
  });
});

describe("map clicks", () => {
  it("become goto commands at the world position", () => {
    expect(clickToGoto({ x: 12.0, y: 3.5 })).toEqual({
      kind: "goto",
      x: 12.0,
      y: 3.5,
    });
  });
});
