/** First-person ray-strip renderer.
 *
 * Each ray becomes one vertical column: height proportional to 1/depth
 * (nearer is taller), color keyed by the hit label. The pure column
 * computation is separated from canvas drawing so it can be unit tested.
 */

import type { Frame } from "./protocol.js";

export interface Column {
  x: number;
  width: number;
  height: number;
  color: string;
}

const LABEL_COLORS: Record<string, string> = {
  "": "#16181d",
  wall: "#5a6470",
  ball: "#d05050",
  plant: "#3f9c4f",
  lamp: "#e0c050",
  cup: "#4f78c0",
  book: "#9450c8",
  clock: "#d07830",
  table: "#8a6a48",
  counter: "#708088",
};

export function labelColor(label: string): string {
  return LABEL_COLORS[label] ?? "#b0b0b0";
}

/** Near depths clamp to full height; misses (depth >= maxRange) draw a
 * floor-level sliver so the horizon stays visible. */
export function columnHeight(
  depth: number,
  maxRange: number,
  viewHeight: number,
  nearClip = 0.25,
): number {
  if (!(depth > 0) || depth >= maxRange) return viewHeight * 0.02;
  const h = (viewHeight * nearClip) / depth;
  return Math.min(h, viewHeight);
}

export function frameColumns(
  frame: Pick<Frame, "rays">,
  viewWidth: number,
  viewHeight: number,
  maxRange = 5.0,
): Column[] {
  const n = frame.rays.depths.length;
  if (n === 0) return [];
  const width = viewWidth / n;
  const columns: Column[] = [];
  for (let i = 0; i < n; i += 1) {
    // depths arrive left-to-right in sensor order; column 0 is leftmost
    columns.push({
      x: i * width,
      width,
      height: columnHeight(frame.rays.depths[i], maxRange, viewHeight),
      color: labelColor(frame.rays.labels[i]),
    });
  }
  return columns;
}

export function statusLine(frame: Frame): string {
  const pose = frame.pose;
  const held = frame.held === null ? "-" : `#${frame.held}`;
  const state = frame.done ? (frame.succeeded ? "SUCCESS" : "ENDED") : "live";
  return (
    `t=${frame.tick} steps=${frame.step_count} ` +
    `x=${pose.x.toFixed(2)} y=${pose.y.toFixed(2)} ` +
    `hdg=${pose.heading.toFixed(0)}° sge=${frame.sge.toFixed(3)} ` +
    `held=${held} [${state}]`
  );
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  frame: Frame,
  maxRange = 5.0,
): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = "#0b0c10";
  ctx.fillRect(0, 0, width, height);
  for (const col of frameColumns(frame, width, height, maxRange)) {
    ctx.fillStyle = col.color;
    const y = (height - col.height) / 2;
    ctx.fillRect(col.x, y, Math.ceil(col.width), col.height);
  }
}
