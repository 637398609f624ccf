import { describe, expect, it } from "vitest";

import { leastSquaresSlope } from "../src/slopes.js";

describe("leastSquaresSlope", () => {
  it("recovers exact powers of h", () => {
    const h = [1, 0.5, 0.25];
    expect(leastSquaresSlope(h, h)).toBeCloseTo(1.0, 10);
    expect(leastSquaresSlope(h, h.map((v) => v * v))).toBeCloseTo(2.0, 10);
    expect(leastSquaresSlope(h, h.map((v) => 3.7 * v ** 1.5))).toBeCloseTo(1.5, 10);
  });

  it("is exact for noisy-free two-level data", () => {
    expect(leastSquaresSlope([1, 0.5], [0.3, 0.075])).toBeCloseTo(2.0, 12);
  });

  it("rejects degenerate input", () => {
    expect(() => leastSquaresSlope([1], [1])).toThrow(/2 levels/);
    expect(() => leastSquaresSlope([1, 1], [1, 2])).toThrow(/equal/);
    expect(() => leastSquaresSlope([1, 0.5], [1, 0])).toThrow(/positive/);
  });
});
