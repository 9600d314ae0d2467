import { describe, expect, it } from "vitest";

import {
  kvDecode,
  kvEncode,
  kvNumber,
  numberedValues,
  parsePolygon,
} from "../src/kvlines.js";

describe("kvlines codec", () => {
  it("round-trips string records", () => {
    const rec = { a: "1", b: "two", poly: "1.5,2.5; 3.0,4.0" };
    expect(kvDecode(kvEncode(rec))).toEqual(rec);
  });

  it("encodes with sorted keys and trailing newline", () => {
    expect(kvEncode({ z: 1, a: 2 })).toBe("a=2\nz=1\n");
  });

  it("encodes booleans lowercase", () => {
    expect(kvEncode({ on: true, off: false })).toBe("off=false\non=true\n");
  });

  it("skips blanks and comments, keeps = inside values", () => {
    expect(kvDecode("# note\n\nk=a=b\n")).toEqual({ k: "a=b" });
  });

  it("throws on a line without =", () => {
    expect(() => kvDecode("broken")).toThrow();
  });

  it("parses Python float reprs", () => {
    const rec = kvDecode("a=0.1\nb=1e-05\nc=-2.5\n");
    expect(kvNumber(rec, "a")).toBeCloseTo(0.1);
    expect(kvNumber(rec, "b")).toBeCloseTo(1e-5);
    expect(kvNumber(rec, "c")).toBe(-2.5);
    expect(kvNumber(rec, "missing", 7)).toBe(7);
    expect(() => kvNumber(rec, "a", 0)).not.toThrow();
    expect(() => kvNumber(kvDecode("x=abc\n"), "x")).toThrow();
  });
});

describe("polygon values", () => {
  it("parses vertex lists", () => {
    expect(parsePolygon("0,0; 1.5,2; -3,4.25")).toEqual([
      { x: 0, y: 0 },
      { x: 1.5, y: 2 },
      { x: -3, y: 4.25 },
    ]);
  });

  it("empty value is an empty polygon", () => {
    expect(parsePolygon("  ")).toEqual([]);
  });

  it("rejects malformed vertices", () => {
    expect(() => parsePolygon("1,2; nope")).toThrow();
  });

  it("collects numbered keys in order and stops at the first gap", () => {
    const rec = { "p.1": "a", "p.2": "b", "p.4": "d" };
    expect(numberedValues(rec, "p")).toEqual(["a", "b"]);
  });
});
