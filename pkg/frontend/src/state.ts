// Client-side mirror of the visualizer state: the fold rules here must
// match the headless reference byte-for-byte at the snapshot level, so the
// browser can be validated against it.

import { Command, parseLine, ProtocolError } from "./protocol.js";

export interface FadeConfig {
  node_fade: number; // seconds
  link_fade: number;
  pulse_duration: number;
  packet_duration: number;
  inactive_alpha: number;
}

export const DEFAULT_FADE: FadeConfig = {
  node_fade: 30,
  link_fade: 30,
  pulse_duration: 0.8,
  packet_duration: 0.6,
  inactive_alpha: 0.5,
};

export interface NodeView {
  id: string;
  x: number;
  y: number;
  color: [number, number, number];
  activated: boolean;
  text: string;
  badges: [string, string];
  neighbors: Map<string, number>; // id -> last_confirmed
  last_activity: number;
}

export type Animation =
  | { kind: "pulse"; node: string; started: number }
  | { kind: "packet"; sender: string; receiver: string; label: string | null; started: number };

export const WARN_UNKNOWN_NODE = "unknown_node";
export const WARN_SELF_LINK = "self_link";

export class ClientState {
  nodes = new Map<string, NodeView>();
  animations: Animation[] = [];
  warnings = new Map<string, number>();
  parseFailures = 0;
  config: FadeConfig;

  constructor(config: Partial<FadeConfig> = {}) {
    this.config = { ...DEFAULT_FADE, ...config };
  }

  /** Fold one WebSocket frame; unparseable frames only bump a counter. */
  handleFrame(line: string, now: number): void {
    let cmd: Command | null;
    try {
      cmd = parseLine(line);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.parseFailures += 1;
        return;
      }
      throw err;
    }
    if (cmd !== null) {
      this.apply(cmd, now);
    }
  }

  private warn(kind: string): void {
    this.warnings.set(kind, (this.warnings.get(kind) ?? 0) + 1);
  }

  apply(cmd: Command, now: number): void {
    if (cmd.kind === "heartBeat") {
      let node = this.nodes.get(cmd.id);
      if (cmd.position === null) {
        if (node === undefined) {
          this.warn(WARN_UNKNOWN_NODE);
          return;
        }
      } else if (node === undefined) {
        node = {
          id: cmd.id,
          x: cmd.position.x,
          y: cmd.position.y,
          color: [255, 255, 255],
          activated: true,
          text: "",
          badges: ["", ""],
          neighbors: new Map(),
          last_activity: now,
        };
        this.nodes.set(cmd.id, node);
      } else {
        node.x = cmd.position.x;
        node.y = cmd.position.y;
      }
      node.last_activity = now;
      this.animations.push({ kind: "pulse", node: cmd.id, started: now });
      return;
    }
    if (cmd.kind === "sendPacket") {
      const sender = this.nodes.get(cmd.sender);
      const receiver = this.nodes.get(cmd.receiver);
      if (sender === undefined) {
        this.warn(WARN_UNKNOWN_NODE);
      } else {
        sender.last_activity = now;
      }
      if (receiver === undefined) {
        this.warn(WARN_UNKNOWN_NODE);
      } else {
        receiver.last_activity = now;
      }
      if (sender !== undefined) {
        this.animations.push({
          kind: "packet",
          sender: cmd.sender,
          receiver: cmd.receiver,
          label: cmd.label,
          started: now,
        });
      }
      return;
    }
    const node = this.nodes.get(cmd.id);
    if (node === undefined) {
      this.warn(WARN_UNKNOWN_NODE);
      return;
    }
    node.last_activity = now;
    switch (cmd.kind) {
      case "changeColor":
        node.color = cmd.color;
        break;
      case "activateNode":
        node.activated = true;
        break;
      case "disactivateNode":
        node.activated = false;
        break;
      case "setText":
        node.text = cmd.text;
        break;
      case "setBadge":
        node.badges[cmd.slot - 1] = cmd.text;
        break;
      case "addNeighbor":
        if (cmd.neighbor === cmd.id) {
          this.warn(WARN_SELF_LINK);
          break;
        }
        node.neighbors.set(cmd.neighbor, now);
        break;
      case "resetNeighbors":
        node.neighbors.clear();
        break;
    }
  }

  durationOf(anim: Animation): number {
    return anim.kind === "pulse" ? this.config.pulse_duration : this.config.packet_duration;
  }

  tick(now: number): void {
    this.animations = this.animations.filter((a) => now - a.started < this.durationOf(a));
  }

  isActive(node: NodeView, now: number): boolean {
    return now - node.last_activity <= this.config.node_fade;
  }

  isStale(lastConfirmed: number, now: number): boolean {
    return now - lastConfirmed > this.config.link_fade;
  }

  /** Snapshot in the exact document shape the headless reference emits. */
  snapshot(now: number): SnapshotDoc {
    const nodes: SnapshotDoc["nodes"] = {};
    for (const id of [...this.nodes.keys()].sort()) {
      const node = this.nodes.get(id)!;
      const neighbors: Record<string, { last_confirmed: number; is_stale: boolean }> = {};
      for (const nid of [...node.neighbors.keys()].sort()) {
        const lastConfirmed = node.neighbors.get(nid)!;
        neighbors[nid] = { last_confirmed: lastConfirmed, is_stale: this.isStale(lastConfirmed, now) };
      }
      nodes[id] = {
        id: node.id,
        position: { x: node.x, y: node.y },
        color: [...node.color],
        activated: node.activated,
        alpha: node.activated ? 1.0 : this.config.inactive_alpha,
        is_active: this.isActive(node, now),
        text: node.text,
        badges: [...node.badges],
        neighbors,
        last_activity: node.last_activity,
      };
    }
    const animations: SnapshotDoc["animations"] = [];
    for (const anim of this.animations) {
      const progress = (now - anim.started) / this.durationOf(anim);
      if (progress >= 1) {
        continue;
      }
      if (anim.kind === "pulse") {
        animations.push({ progress: Math.max(progress, 0), started: anim.started, kind: "pulse", node: anim.node });
      } else {
        animations.push({
          progress: Math.max(progress, 0),
          started: anim.started,
          kind: "packet",
          sender: anim.sender,
          receiver: anim.receiver,
          label: anim.label,
        });
      }
    }
    const warnings: Record<string, number> = {};
    for (const key of [...this.warnings.keys()].sort()) {
      warnings[key] = this.warnings.get(key)!;
    }
    return { nodes, animations, warnings };
  }
}

export interface SnapshotDoc {
  nodes: Record<
    string,
    {
      id: string;
      position: { x: number; y: number };
      color: number[];
      activated: boolean;
      alpha: number;
      is_active: boolean;
      text: string;
      badges: string[];
      neighbors: Record<string, { last_confirmed?: number; is_stale: boolean }>;
      last_activity?: number;
    }
  >;
  animations: Array<Record<string, unknown>>;
  warnings: Record<string, number>;
}

/** Remove raw timestamps and animation progress for cross-session comparison. */
export function scrubSnapshot(doc: SnapshotDoc): SnapshotDoc {
  const out = JSON.parse(JSON.stringify(doc)) as SnapshotDoc;
  for (const node of Object.values(out.nodes)) {
    delete node.last_activity;
    for (const link of Object.values(node.neighbors)) {
      delete link.last_confirmed;
    }
  }
  for (const anim of out.animations) {
    delete anim.progress;
    delete anim.started;
  }
  return out;
}

function stableStringify(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  const entries = Object.entries(value as Record<string, unknown>).sort(([a], [b]) =>
    a < b ? -1 : a > b ? 1 : 0,
  );
  return `{${entries.map(([k, v]) => `${JSON.stringify(k)}:${stableStringify(v)}`).join(",")}}`;
}

/** Serialize the state in the shared snapshot schema, keys sorted. */
export function exportState(state: ClientState, now: number): string {
  return stableStringify(state.snapshot(now));
}
