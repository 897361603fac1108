/** Canvas strip charts for the live signals. The geometry helpers are
 * pure so they can be tested without a canvas. */

import type { RollingBuffer } from "./buffer.js";

export interface ViewBox {
  t0: number;
  t1: number;
  vMin: number;
  vMax: number;
  width: number;
  height: number;
}

/** Pad a value range so flat signals still occupy visible height. */
export function padRange(min: number, max: number): [number, number] {
  if (!Number.isFinite(min) || !Number.isFinite(max)) {
    return [-1, 1];
  }
  if (min === max) {
    const pad = Math.max(1, Math.abs(min) * 0.1);
    return [min - pad, max + pad];
  }
  const pad = (max - min) * 0.08;
  return [min - pad, max + pad];
}

/** Map samples into pixel space, y growing downward. */
export function project(
  times: number[],
  values: number[],
  box: ViewBox,
): Array<[number, number]> {
  const dt = box.t1 - box.t0 || 1;
  const dv = box.vMax - box.vMin || 1;
  const points: Array<[number, number]> = [];
  for (let i = 0; i < times.length; i++) {
    const x = ((times[i] - box.t0) / dt) * box.width;
    const y = box.height - ((values[i] - box.vMin) / dv) * box.height;
    points.push([x, y]);
  }
  return points;
}

export class StripChart {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly color: string,
    private readonly windowS: number,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) {
      throw new Error("canvas 2d context unavailable");
    }
    this.ctx = ctx;
  }

  draw(buffer: RollingBuffer): void {
    const { width, height } = this.canvas;
    const ctx = this.ctx;
    ctx.fillStyle = "#11161d";
    ctx.fillRect(0, 0, width, height);

    const latest = buffer.latest();
    if (latest === null) {
      return;
    }
    // Pin the window's right edge to the newest sample so the trace
    // scrolls instead of compressing.
    const t1 = Math.max(latest.t, this.windowS);
    const t0 = t1 - this.windowS;
    const [vMin, vMax] = padRange(
      Math.min(...buffer.values),
      Math.max(...buffer.values),
    );
    const box: ViewBox = { t0, t1, vMin, vMax, width, height };

    if (vMin < 0 && vMax > 0) {
      const zero = project([t0], [0], box)[0];
      ctx.strokeStyle = "#2a3442";
      ctx.beginPath();
      ctx.moveTo(0, zero[1]);
      ctx.lineTo(width, zero[1]);
      ctx.stroke();
    }

    const points = project(buffer.times, buffer.values, box);
    ctx.strokeStyle = this.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    for (let i = 0; i < points.length; i++) {
      if (i === 0) {
        ctx.moveTo(points[i][0], points[i][1]);
      } else {
        ctx.lineTo(points[i][0], points[i][1]);
      }
    }
    ctx.stroke();
  }
}
