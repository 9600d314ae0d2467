/**
 * Canvas map rendering: explored polygons, obstacle clusters, trajectory,
 * the active path contour, and the robot. Everything drawn comes from
 * server events; there is no client-side simulation.
 */

import { PathParams, Point, ViewState } from "./types.js";

export interface Viewport {
  /** World-frame center of the view. */
  center: Point;
  /** Pixels per meter. */
  scale: number;
  widthPx: number;
  heightPx: number;
}

export function worldToScreen(p: Point, vp: Viewport): Point {
  return {
    x: (p.x - vp.center.x) * vp.scale + vp.widthPx / 2,
    // canvas y grows downward
    y: vp.heightPx / 2 - (p.y - vp.center.y) * vp.scale,
  };
}

export function screenToWorld(p: Point, vp: Viewport): Point {
  return {
    x: (p.x - vp.widthPx / 2) / vp.scale + vp.center.x,
    y: (vp.heightPx / 2 - p.y) / vp.scale + vp.center.y,
  };
}

/**
 * Sample the contour polyline of a path function in world coordinates:
 * y' = a x'^3 + b x'^2 + c x' + d marched along the local x-axis, then
 * rotated/translated out of the anchored frame.
 */
export function contourPoints(
  path: PathParams,
  fromX = -2,
  toX = 8,
  samples = 120,
): Point[] {
  const ch = Math.cos(path.heading);
  const sh = Math.sin(path.heading);
  const out: Point[] = [];
  for (let i = 0; i < samples; i++) {
    const xl = fromX + ((toX - fromX) * i) / (samples - 1);
    const yl = ((path.a * xl + path.b) * xl + path.c) * xl + path.d;
    out.push({
      x: path.anchorX + ch * xl - sh * yl,
      y: path.anchorY + sh * xl + ch * yl,
    });
  }
  return out;
}

function polyline(
  ctx: CanvasRenderingContext2D,
  pts: Point[],
  vp: Viewport,
  close: boolean,
): void {
  if (pts.length < 2) return;
  ctx.beginPath();
  pts.forEach((p, i) => {
    const s = worldToScreen(p, vp);
    if (i === 0) ctx.moveTo(s.x, s.y);
    else ctx.lineTo(s.x, s.y);
  });
  if (close) ctx.closePath();
}

export function render(
  ctx: CanvasRenderingContext2D,
  state: ViewState,
  vp: Viewport,
): void {
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, vp.widthPx, vp.heightPx);

  ctx.fillStyle = "rgba(46, 125, 50, 0.25)";
  ctx.strokeStyle = "rgba(129, 199, 132, 0.6)";
  ctx.lineWidth = 1;
  for (const poly of state.explored) {
    polyline(ctx, poly, vp, true);
    ctx.fill();
    ctx.stroke();
  }

  ctx.strokeStyle = "#ef5350";
  ctx.lineWidth = 2;
  for (const cluster of state.clusters) {
    polyline(ctx, cluster, vp, false);
    ctx.stroke();
  }

  if (state.path) {
    ctx.strokeStyle = "#4fc3f7";
    ctx.lineWidth = 1.5;
    polyline(ctx, contourPoints(state.path), vp, false);
    ctx.stroke();
  }

  if (state.trajectory.length >= 2) {
    ctx.strokeStyle = "#ffd54f";
    ctx.lineWidth = 1;
    polyline(ctx, state.trajectory, vp, false);
    ctx.stroke();
  }

  if (state.pose) {
    const s = worldToScreen(state.pose, vp);
    ctx.fillStyle = state.stuck ? "#ff1744" : "#ffffff";
    ctx.beginPath();
    ctx.arc(s.x, s.y, 6, 0, 2 * Math.PI);
    ctx.fill();
    // heading tick
    ctx.strokeStyle = ctx.fillStyle;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(s.x, s.y);
    ctx.lineTo(
      s.x + 14 * Math.cos(state.pose.heading),
      s.y - 14 * Math.sin(state.pose.heading),
    );
    ctx.stroke();
  }
}
