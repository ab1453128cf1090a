// Browser entry point: connect to the control unit's WebSocket relay,
// mirror the stream into ClientState, and render every animation frame.
//
// Query parameters:
//   ?ws=ws://host:port/stream   stream URL (default: this host, /stream)
//   ?node_fade=30&link_fade=30  fade durations in seconds
//   ?pulse_ms=800&packet_ms=600 animation durations in milliseconds
//   ?inactive_alpha=0.5
// Keys: g = grid, r = rulers, f = fading on/off.

import { exportState, ClientState, FadeConfig } from "./state.js";
import { render, DrawContext, Overlay, Viewport } from "./render.js";

function fadeFromQuery(params: URLSearchParams): Partial<FadeConfig> {
  const out: Partial<FadeConfig> = {};
  const num = (name: string) => {
    const raw = params.get(name);
    if (raw === null) return undefined;
    const v = Number(raw);
    return Number.isFinite(v) && v > 0 ? v : undefined;
  };
  const nodeFade = num("node_fade");
  if (nodeFade !== undefined) out.node_fade = nodeFade;
  const linkFade = num("link_fade");
  if (linkFade !== undefined) out.link_fade = linkFade;
  const pulseMs = num("pulse_ms");
  if (pulseMs !== undefined) out.pulse_duration = pulseMs / 1000;
  const packetMs = num("packet_ms");
  if (packetMs !== undefined) out.packet_duration = packetMs / 1000;
  const alpha = params.get("inactive_alpha");
  if (alpha !== null && Number.isFinite(Number(alpha))) out.inactive_alpha = Number(alpha);
  return out;
}

function nowSeconds(): number {
  return performance.now() / 1000;
}

function main(): void {
  const params = new URLSearchParams(location.search);
  const state = new ClientState(fadeFromQuery(params));
  const overlay: Overlay = { grid_on: false, rulers_on: false, fading_on: true };

  const canvas = document.getElementById("view") as HTMLCanvasElement;
  // the 2D context satisfies the renderer's string-typed style subset
  const ctx = canvas.getContext("2d")! as unknown as DrawContext;
  const statusEl = document.getElementById("status")!;

  function resize(): void {
    canvas.width = window.innerWidth;
    canvas.height = window.innerHeight;
  }
  resize();
  window.addEventListener("resize", resize);

  const defaultUrl = `ws://${location.hostname || "127.0.0.1"}:${location.port || "47002"}/stream`;
  const wsUrl = params.get("ws") ?? defaultUrl;
  let connected = false;
  let framesIn = 0;
  let backoff = 0.5;

  function connect(): void {
    statusEl.textContent = `connecting to ${wsUrl} ...`;
    const socket = new WebSocket(wsUrl);
    socket.onopen = () => {
      connected = true;
      backoff = 0.5;
    };
    socket.onmessage = (event) => {
      framesIn += 1;
      state.handleFrame(String(event.data), nowSeconds());
    };
    socket.onclose = () => {
      connected = false;
      setTimeout(connect, backoff * 1000);
      backoff = Math.min(backoff * 1.5, 10);
    };
    socket.onerror = () => {
      socket.close();
    };
  }
  connect();

  window.addEventListener("keydown", (event) => {
    if (event.key === "g") overlay.grid_on = !overlay.grid_on;
    if (event.key === "r") overlay.rulers_on = !overlay.rulers_on;
    if (event.key === "f") overlay.fading_on = !overlay.fading_on;
  });

  document.getElementById("fullscreen")?.addEventListener("click", () => {
    document.documentElement.requestFullscreen?.();
  });
  document.getElementById("export")?.addEventListener("click", () => {
    const blob = new Blob([exportState(state, nowSeconds())], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "state.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  // console / automation hook for the state-mirror check
  (window as unknown as Record<string, unknown>).iridaExportState = () =>
    exportState(state, nowSeconds());

  function frame(): void {
    const now = nowSeconds();
    state.tick(now);
    const vp: Viewport = { width: canvas.width, height: canvas.height, margin: 40 };
    render(state, now, ctx, vp, overlay);
    statusEl.textContent =
      `${connected ? "live" : "reconnecting"} | ${wsUrl} | frames ${framesIn}` +
      ` | nodes ${state.nodes.size}` +
      (state.parseFailures ? ` | parse failures ${state.parseFailures}` : "") +
      ` | [g]rid ${overlay.grid_on ? "on" : "off"} [r]ulers ${overlay.rulers_on ? "on" : "off"}` +
      ` [f]ading ${overlay.fading_on ? "on" : "off"}`;
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

window.addEventListener("load", main);
