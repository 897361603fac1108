import { describe, expect, it } from "vitest";

import { padRange, project, type ViewBox } from "../src/plot.js";

const BOX: ViewBox = { t0: 0, t1: 10, vMin: -1, vMax: 1, width: 300, height: 100 };

describe("plot projection", () => {
  it("maps window corners onto canvas corners", () => {
    const points = project([0, 10], [-1, 1], BOX);
    expect(points[0]).toEqual([0, 100]); // oldest, lowest: bottom left
    expect(points[1]).toEqual([300, 0]); // newest, highest: top right
  });

  it("puts the midpoint in the middle", () => {
    const [point] = project([5], [0], BOX);
    expect(point[0]).toBeCloseTo(150);
    expect(point[1]).toBeCloseTo(50);
  });

  it("handles an empty buffer and a degenerate range", () => {
    expect(project([], [], BOX)).toEqual([]);
    const flat = project([1], [3], { ...BOX, vMin: 3, vMax: 3 });
    expect(Number.isFinite(flat[0][1])).toBe(true);
  });

  it("pads a flat signal so it stays visible", () => {
    const [lo, hi] = padRange(60, 60);
    expect(lo).toBeLessThan(60);
    expect(hi).toBeGreaterThan(60);
  });

  it("pads a real range proportionally", () => {
    const [lo, hi] = padRange(0, 120);
    expect(lo).toBeLessThan(0);
    expect(hi).toBeGreaterThan(120);
    expect(hi - lo).toBeCloseTo(120 * 1.16, 5);
  });

  it("falls back to a unit range on an empty extent", () => {
    // Math.min()/Math.max() of no samples give infinities.
    expect(padRange(Infinity, -Infinity)).toEqual([-1, 1]);
  });
});
