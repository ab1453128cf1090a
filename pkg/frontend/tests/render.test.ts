// Visual-contract smoke tests against the recorded draw-call log: the
// renderer is exercised with a fake context that records every call.

import { describe, expect, it } from "vitest";

import {
  BADGE_OFFSET,
  DrawContext,
  NODE_RADIUS,
  Overlay,
  PULSE_GROWTH,
  Viewport,
  project,
  render,
} from "../src/render.js";
import { ClientState } from "../src/state.js";

type Call = { op: string; args: unknown[]; alpha: number; fill: string; stroke: string };

class RecordingContext implements DrawContext {
  fillStyle = "";
  strokeStyle = "";
  globalAlpha = 1;
  lineWidth = 1;
  font = "";
  textAlign = "";
  textBaseline = "";
  calls: Call[] = [];

  private record(op: string, ...args: unknown[]): void {
    this.calls.push({
      op,
      args,
      alpha: this.globalAlpha,
      fill: this.fillStyle,
      stroke: this.strokeStyle,
    });
  }

  clearRect(...args: unknown[]): void { this.record("clearRect", ...args); }
  beginPath(): void { this.record("beginPath"); }
  arc(...args: unknown[]): void { this.record("arc", ...args); }
  fill(): void { this.record("fill"); }
  stroke(): void { this.record("stroke"); }
  moveTo(...args: unknown[]): void { this.record("moveTo", ...args); }
  lineTo(...args: unknown[]): void { this.record("lineTo", ...args); }
  fillText(...args: unknown[]): void { this.record("fillText", ...args); }

  ops(op: string): Call[] {
    return this.calls.filter((c) => c.op === op);
  }
}

const vp: Viewport = { width: 1000, height: 800, margin: 0 };
const overlayOff: Overlay = { grid_on: false, rulers_on: false, fading_on: true };

function draw(state: ClientState, now: number, overlay: Overlay = overlayOff): RecordingContext {
  const ctx = new RecordingContext();
  render(state, now, ctx, vp, overlay);
  return ctx;
}

describe("render contract", () => {
  it("disactivated nodes draw at 50% opacity", () => {
    const state = new ClientState();
    state.handleFrame("heartBeat 0x00 0.5 0.5", 0);
    state.handleFrame("disactivateNode 0x00", 0);
    state.tick(10);
    const ctx = draw(state, 10);
    const nodeFills = ctx.ops("fill").filter((c) => c.fill === "rgb(255,255,255)");
    expect(nodeFills).toHaveLength(1);
    expect(nodeFills[0].alpha).toBeCloseTo(0.5, 5);
  });

  it("activated nodes draw fully opaque in their color", () => {
    const state = new ClientState();
    state.handleFrame("heartBeat 0x00 0.5 0.5", 0);
    state.handleFrame("changeColor 0x00 0 0 255", 0);
    state.tick(10);
    const ctx = draw(state, 10);
    const nodeFills = ctx.ops("fill").filter((c) => c.fill === "rgb(0,0,255)");
    expect(nodeFills).toHaveLength(1);
    expect(nodeFills[0].alpha).toBeCloseTo(1, 3);
  });

  it("badge slot 2 renders top-right of the node, slot 1 top-left", () => {
    const state = new ClientState();
    state.handleFrame("heartBeat 0x00 0.5 0.5", 0);
    state.handleFrame("setBadge 0x00 2 7", 0);
    state.handleFrame("setBadge 0x00 1 3", 0);
    state.tick(10);
    const ctx = draw(state, 10);
    const [cx, cy] = project(vp, 0.5, 0.5);
    const texts = ctx.ops("fillText");
    const right = texts.find((c) => c.args[0] === "7");
    const left = texts.find((c) => c.args[0] === "3");
    expect(right).toBeDefined();
    expect(left).toBeDefined();
    expect(right!.args[1]).toBeCloseTo(cx + BADGE_OFFSET, 5);
    expect(left!.args[1]).toBeCloseTo(cx - BADGE_OFFSET, 5);
    expect(right!.args[2] as number).toBeLessThan(cy); // above the node
  });

  it("node text renders beneath the node", () => {
    const state = new ClientState();
    state.handleFrame("heartBeat 0x00 0.5 0.5", 0);
    state.handleFrame("setText 0x00 Cluster Leader", 0);
    state.tick(10);
    const ctx = draw(state, 10);
    const [, cy] = project(vp, 0.5, 0.5);
    const label = ctx.ops("fillText").find((c) => c.args[0] === "Cluster Leader");
    expect(label).toBeDefined();
    expect(label!.args[2] as number).toBeGreaterThan(cy);
  });

  it("pulse ring starts at node radius and grows while fading", () => {
    const state = new ClientState();
    state.handleFrame("heartBeat 0x00 0.5 0.5", 10);
    // progress 0: ring radius == node radius, alpha == 1
    let ctx = draw(state, 10);
    let rings = ctx.ops("arc").filter((c) => (c.args[2] as number) >= NODE_RADIUS);
    expect(rings.some((c) => Math.abs((c.args[2] as number) - NODE_RADIUS) < 1e-9)).toBe(true);
    // progress 0.5: radius halfway to PULSE_GROWTH x, alpha 0.5
    ctx = draw(state, 10.4);
    const expected = NODE_RADIUS * (1 + (PULSE_GROWTH - 1) * 0.5);
    const ring = ctx.ops("arc").find((c) => Math.abs((c.args[2] as number) - expected) < 1e-9);
    expect(ring).toBeDefined();
    expect(ring!.alpha).toBeCloseTo(0.5, 5);
    // progress 1: ring gone
    ctx = draw(state, 10.8);
    const big = ctx.ops("arc").filter((c) => (c.args[2] as number) > NODE_RADIUS);
    expect(big).toHaveLength(0);
  });

  it("packet dot interpolates linearly between endpoints", () => {
    const state = new ClientState();
    state.handleFrame("heartBeat 0x00 0.2 0.2", 0);
    state.handleFrame("heartBeat 0x01 0.8 0.2", 0);
    state.handleFrame("sendPacket 0x00 0x01", 10);
    const ctx = draw(state, 10.3); // progress 0.5 of 600 ms
    const [ex, ey] = project(vp, 0.5, 0.2);
    const dot = ctx
      .ops("arc")
      .find((c) => Math.abs((c.args[0] as number) - ex) < 1e-6 && Math.abs((c.args[1] as number) - ey) < 1e-6);
    expect(dot).toBeDefined();
    expect(dot!.fill).toBe("rgb(255,255,255)");
  });

  it("animations whose nodes are unknown are skipped", () => {
    const state = new ClientState();
    state.handleFrame("heartBeat 0x00 0.5 0.5", 0);
    state.handleFrame("sendPacket 0x00 0x99", 10); // receiver never introduced
    const ctx = draw(state, 10.2);
    expect(ctx.ops("arc").length).toBeGreaterThan(0); // the node itself
    const whiteDots = ctx.ops("fill").filter((c) => c.fill === "rgb(255,255,255)" && c.alpha === 1);
    expect(whiteDots.length).toBeLessThanOrEqual(1); // node fill only, no packet dot
  });

  it("neighbor lines fade with age and honor the fading toggle", () => {
    const state = new ClientState({ link_fade: 10 });
    state.handleFrame("heartBeat 0x00 0.2 0.2", 0);
    state.handleFrame("heartBeat 0x01 0.8 0.2", 0);
    state.handleFrame("addNeighbor 0x00 0x01", 0);
    state.tick(20);
    // fully aged out: no line with fading on
    let ctx = draw(state, 20);
    let lines = ctx.ops("stroke").filter((c) => c.stroke === "rgb(120,160,200)");
    expect(lines).toHaveLength(0);
    // fading disabled: line returns at full link alpha
    ctx = draw(state, 20, { ...overlayOff, fading_on: false });
    lines = ctx.ops("stroke").filter((c) => c.stroke === "rgb(120,160,200)");
    expect(lines).toHaveLength(1);
    expect(lines[0].alpha).toBeCloseTo(0.6, 5);
  });

  it("calibration grid toggles with overlay.grid_on", () => {
    const state = new ClientState();
    const off = draw(state, 0);
    expect(off.ops("stroke").filter((c) => c.stroke === "rgb(90,90,90)")).toHaveLength(0);
    const on = draw(state, 0, { ...overlayOff, grid_on: true });
    // 11 vertical + 11 horizontal lines
    expect(on.ops("stroke").filter((c) => c.stroke === "rgb(90,90,90)")).toHaveLength(22);
  });

  it("rulers draw ticks and labels every 0.1", () => {
    const state = new ClientState();
    const ctx = draw(state, 0, { ...overlayOff, rulers_on: true });
    const labels = ctx.ops("fillText").map((c) => c.args[0]);
    for (let i = 0; i <= 10; i++) {
      expect(labels.filter((t) => t === (i / 10).toFixed(1)).length).toBe(2); // top + left
    }
  });

  it("render never mutates the state", () => {
    const state = new ClientState();
    state.handleFrame("heartBeat 0x00 0.5 0.5", 0);
    state.handleFrame("addNeighbor 0x00 0x01", 0);
    const before = JSON.stringify(state.snapshot(0.5));
    draw(state, 0.5, { grid_on: true, rulers_on: true, fading_on: true });
    expect(JSON.stringify(state.snapshot(0.5))).toBe(before);
  });
});
