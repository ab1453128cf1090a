// Canvas renderer: nodes as filled circles, growing pulse rings, packet
// dots gliding sender -> receiver, neighbor lines that fade with age, a
// text label and two badges per node, plus the projector-calibration
// grid and rulers. Rendering only reads the state.

import { ClientState, NodeView } from "./state.js";

// Subset of CanvasRenderingContext2D the renderer needs; tests substitute
// a recording implementation to inspect the draw-call log.
export interface DrawContext {
  fillStyle: string;
  strokeStyle: string;
  globalAlpha: number;
  lineWidth: number;
  font: string;
  textAlign: string;
  textBaseline: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Overlay {
  grid_on: boolean;
  rulers_on: boolean;
  fading_on: boolean;
}

export interface Viewport {
  width: number;
  height: number;
  margin: number;
}

export const NODE_RADIUS = 12;
export const PULSE_GROWTH = 3; // ring grows to 3x the node radius
export const PACKET_RADIUS = 4;
export const BADGE_OFFSET = NODE_RADIUS * 0.9;

export function project(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.margin + x * (vp.width - 2 * vp.margin), vp.margin + y * (vp.height - 2 * vp.margin)];
}

function rgb([r, g, b]: number[]): string {
  return `rgb(${r},${g},${b})`;
}

// Full strength while the node counts as active; once inactive, fade down
// to a faint floor over one more fade period so stale nodes stay locatable.
function activityFade(state: ClientState, node: NodeView, now: number, fading: boolean): number {
  if (!fading) {
    return 1;
  }
  const age = now - node.last_activity;
  const fade = state.config.node_fade;
  if (age <= fade) {
    return 1;
  }
  return Math.max(0.1, 1 - (age - fade) / fade);
}

export function render(
  state: ClientState,
  now: number,
  ctx: DrawContext,
  vp: Viewport,
  overlay: Overlay,
): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  if (overlay.grid_on) {
    drawGrid(ctx, vp);
  }
  if (overlay.rulers_on) {
    drawRulers(ctx, vp);
  }

  // neighbor lines below everything else
  for (const node of state.nodes.values()) {
    const [x0, y0] = project(vp, node.x, node.y);
    for (const [neighborId, lastConfirmed] of node.neighbors) {
      const other = state.nodes.get(neighborId);
      if (other === undefined) {
        continue; // neighbor not introduced yet
      }
      const [x1, y1] = project(vp, other.x, other.y);
      let alpha = 0.6;
      if (overlay.fading_on) {
        const age = now - lastConfirmed;
        const fade = state.config.link_fade;
        alpha *= age <= fade ? 1 : Math.max(0, 1 - (age - fade) / fade);
      }
      if (alpha <= 0) {
        continue;
      }
      ctx.globalAlpha = alpha;
      ctx.strokeStyle = "rgb(120,160,200)";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.moveTo(x0, y0);
      ctx.lineTo(x1, y1);
      ctx.stroke();
    }
  }

  // nodes with text and badges
  ctx.textAlign = "center";
  for (const node of state.nodes.values()) {
    const [x, y] = project(vp, node.x, node.y);
    const alpha = (node.activated ? 1 : state.config.inactive_alpha) * activityFade(state, node, now, overlay.fading_on);
    ctx.globalAlpha = alpha;
    ctx.fillStyle = rgb(node.color);
    ctx.beginPath();
    ctx.arc(x, y, NODE_RADIUS, 0, Math.PI * 2);
    ctx.fill();
    ctx.strokeStyle = "rgb(30,30,30)";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.arc(x, y, NODE_RADIUS, 0, Math.PI * 2);
    ctx.stroke();

    ctx.fillStyle = "rgb(230,230,230)";
    ctx.font = "12px sans-serif";
    ctx.textBaseline = "top";
    if (node.text) {
      ctx.fillText(node.text, x, y + NODE_RADIUS + 4);
    }
    ctx.font = "11px sans-serif";
    ctx.textBaseline = "bottom";
    if (node.badges[0]) {
      ctx.fillText(node.badges[0], x - BADGE_OFFSET, y - NODE_RADIUS - 2); // top-left badge
    }
    if (node.badges[1]) {
      ctx.fillText(node.badges[1], x + BADGE_OFFSET, y - NODE_RADIUS - 2); // top-right badge
    }
  }

  // animations on top
  for (const anim of state.animations) {
    const progress = (now - anim.started) / state.durationOf(anim);
    if (progress < 0 || progress >= 1) {
      continue;
    }
    if (anim.kind === "pulse") {
      const node = state.nodes.get(anim.node);
      if (node === undefined) {
        continue;
      }
      const [x, y] = project(vp, node.x, node.y);
      ctx.globalAlpha = 1 - progress; // fully transparent at the end of the pulse
      ctx.strokeStyle = rgb(node.color);
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(x, y, NODE_RADIUS * (1 + (PULSE_GROWTH - 1) * progress), 0, Math.PI * 2);
      ctx.stroke();
    } else {
      const sender = state.nodes.get(anim.sender);
      const receiver = state.nodes.get(anim.receiver);
      if (sender === undefined || receiver === undefined) {
        continue;
      }
      const [x0, y0] = project(vp, sender.x, sender.y);
      const [x1, y1] = project(vp, receiver.x, receiver.y);
      ctx.globalAlpha = 1 - progress;
      ctx.strokeStyle = "rgb(255,255,255)";
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.moveTo(x0, y0);
      ctx.lineTo(x1, y1);
      ctx.stroke();
      const px = x0 + (x1 - x0) * progress;
      const py = y0 + (y1 - y0) * progress;
      ctx.globalAlpha = 1;
      ctx.fillStyle = "rgb(255,255,255)";
      ctx.beginPath();
      ctx.arc(px, py, PACKET_RADIUS, 0, Math.PI * 2);
      ctx.fill();
      if (anim.label) {
        ctx.font = "10px sans-serif";
        ctx.textAlign = "center";
        ctx.textBaseline = "bottom";
        ctx.fillText(anim.label, px, py - PACKET_RADIUS - 2);
      }
    }
  }
  ctx.globalAlpha = 1;
}

// 10x10 calibration grid over the unit square
export function drawGrid(ctx: DrawContext, vp: Viewport): void {
  ctx.globalAlpha = 0.35;
  ctx.strokeStyle = "rgb(90,90,90)";
  ctx.lineWidth = 1;
  for (let i = 0; i <= 10; i++) {
    const [x0, y0] = project(vp, i / 10, 0);
    const [x1, y1] = project(vp, i / 10, 1);
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
    const [hx0, hy0] = project(vp, 0, i / 10);
    const [hx1, hy1] = project(vp, 1, i / 10);
    ctx.beginPath();
    ctx.moveTo(hx0, hy0);
    ctx.lineTo(hx1, hy1);
    ctx.stroke();
  }
  ctx.globalAlpha = 1;
}

// edge rulers with a tick and label every 0.1
export function drawRulers(ctx: DrawContext, vp: Viewport): void {
  ctx.globalAlpha = 0.8;
  ctx.strokeStyle = "rgb(160,160,160)";
  ctx.fillStyle = "rgb(160,160,160)";
  ctx.lineWidth = 1;
  ctx.font = "10px sans-serif";
  for (let i = 0; i <= 10; i++) {
    const t = i / 10;
    const [x, yTop] = project(vp, t, 0);
    ctx.beginPath();
    ctx.moveTo(x, yTop - 8);
    ctx.lineTo(x, yTop);
    ctx.stroke();
    ctx.textAlign = "center";
    ctx.textBaseline = "bottom";
    ctx.fillText(t.toFixed(1), x, yTop - 10);
    const [xLeft, y] = project(vp, 0, t);
    ctx.beginPath();
    ctx.moveTo(xLeft - 8, y);
    ctx.lineTo(xLeft, y);
    ctx.stroke();
    ctx.textAlign = "right";
    ctx.textBaseline = "middle";
    ctx.fillText(t.toFixed(1), xLeft - 10, y);
  }
  ctx.globalAlpha = 1;
}
