import { describe, expect, it } from "vitest";

import { columnHeight, frameColumns, labelColor, statusLine } from "../src/render.js";
import type { Frame } from "../src/protocol.js";

describe("columnHeight", () => {
  it("is inversely proportional to depth", () => {
    const near = columnHeight(0.5, 5.0, 400);
    const far = columnHeight(2.0, 5.0, 400);
    expect(near).toBeCloseTo(far * 4, 9);
  });

  it("clamps very near hits to the full view height", () => {
    expect(columnHeight(0.01, 5.0, 400)).toBe(400);
  });

  it("draws misses and bad depths as a 2% sliver", () => {
    expect(columnHeight(5.0, 5.0, 400)).toBe(8);
    expect(columnHeight(7.3, 5.0, 400)).toBe(8);
    expect(columnHeight(0, 5.0, 400)).toBe(8);
    expect(columnHeight(NaN, 5.0, 400)).toBe(8);
  });
});

describe("labelColor", () => {
  it("knows the scene labels", () => {
    expect(labelColor("wall")).toBe("#5a6470");
    expect(labelColor("")).toBe("#16181d");
  });

  it("falls back to grey for unknown labels", () => {
    expect(labelColor("mystery")).toBe("#b0b0b0");
  });
});

describe("frameColumns", () => {
  const rays = {
    labels: ["wall", "", "book", "wall"],
    depths: [1.0, 5.0, 0.5, 2.0],
  };

  it("tiles the view width left to right", () => {
    const cols = frameColumns({ rays }, 400, 200);
    expect(cols).toHaveLength(4);
    expect(cols.map((c) => c.x)).toEqual([0, 100, 200, 300]);
    expect(cols.every((c) => c.width === 100)).toBe(true);
  });

  it("uses columnHeight and labelColor per ray", () => {
    const cols = frameColumns({ rays }, 400, 200);
    expect(cols[0].height).toBe(columnHeight(1.0, 5.0, 200));
    expect(cols[1].height).toBe(200 * 0.02); // miss sliver
    expect(cols[2].color).toBe(labelColor("book"));
  });

  it("handles an empty ray strip", () => {
    expect(frameColumns({ rays: { labels: [], depths: [] } }, 400, 200)).toEqual([]);
  });
});

describe("statusLine", () => {
  const frame: Frame = {
    type: "frame",
    v: "telev1",
    seq: 3,
    tick: 12,
    pose: { x: 1.25, y: 2.5, heading: 90, pitch: 0 },
    rays: { labels: [], depths: [] },
    sge: 0.1234,
    held: null,
    step_count: 7,
    done: false,
    succeeded: false,
  };

  it("reports pose, progress and state", () => {
    const line = statusLine(frame);
    expect(line).toContain("t=12");
    expect(line).toContain("steps=7");
    expect(line).toContain("x=1.25");
    expect(line).toContain("held=-");
    expect(line).toContain("[live]");
  });

  it("reports success and the held object", () => {
    const line = statusLine({ ...frame, held: 4, done: true, succeeded: true });
    expect(line).toContain("held=#4");
    expect(line).toContain("[SUCCESS]");
  });
});
