// Line grammar for the Irida stream, mirroring the reference parser:
// first token picks the command, trailing free-text fields consume the
// rest of the line with whitespace runs collapsed to single spaces.

export type Command =
  | { kind: "heartBeat"; id: string; position: { x: number; y: number } | null }
  | { kind: "changeColor"; id: string; color: [number, number, number] }
  | { kind: "activateNode"; id: string }
  | { kind: "disactivateNode"; id: string }
  | { kind: "sendPacket"; sender: string; receiver: string; label: string | null }
  | { kind: "addNeighbor"; id: string; neighbor: string }
  | { kind: "resetNeighbors"; id: string }
  | { kind: "setText"; id: string; text: string }
  | { kind: "setBadge"; id: string; slot: 1 | 2; text: string };

export type ErrorCode = "unknown_command" | "arity" | "range" | "number_format";

export class ProtocolError extends Error {
  constructor(public code: ErrorCode, message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

const INT = /^[+-]?[0-9]+$/;
const FLOAT = /^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/;

function intArg(token: string, what: string, lo: number, hi: number): number {
  if (!INT.test(token)) {
    throw new ProtocolError("number_format", `${what} must be a base-10 integer: ${token}`);
  }
  const value = parseInt(token, 10);
  if (value < lo || value > hi) {
    throw new ProtocolError("range", `${what} out of [${lo},${hi}]: ${value}`);
  }
  return value;
}

function floatArg(token: string, what: string): number {
  if (!FLOAT.test(token)) {
    throw new ProtocolError("number_format", `${what} must be a number: ${token}`);
  }
  const value = Number(token);
  if (!(value >= 0 && value <= 1)) {
    throw new ProtocolError("range", `${what} out of [0,1]: ${token}`);
  }
  return value;
}

function exactly(args: string[], n: number, name: string): void {
  if (args.length !== n) {
    throw new ProtocolError("arity", `${name} expects ${n} arguments, got ${args.length}`);
  }
}

function atLeast(args: string[], n: number, name: string): void {
  if (args.length < n) {
    throw new ProtocolError("arity", `${name} expects at least ${n} arguments, got ${args.length}`);
  }
}

/** Parse one protocol line; returns null for blank lines (skip). */
export function parseLine(line: string): Command | null {
  const stripped = line.replace(/^[ \t]+|[ \t]+$/g, "");
  if (!stripped) {
    return null;
  }
  const tokens = stripped.split(/[ \t]+/);
  let name = tokens[0];
  const args = tokens.slice(1);
  if (name === "addNeighbour") {
    name = "addNeighbor"; // firmware spelling accepted on input
  }
  switch (name) {
    case "heartBeat": {
      if (args.length === 1) {
        return { kind: "heartBeat", id: args[0], position: null };
      }
      if (args.length === 3) {
        return {
          kind: "heartBeat",
          id: args[0],
          position: { x: floatArg(args[1], "x position"), y: floatArg(args[2], "y position") },
        };
      }
      throw new ProtocolError("arity", `heartBeat expects 1 or 3 arguments, got ${args.length}`);
    }
    case "changeColor": {
      exactly(args, 4, "changeColor");
      return {
        kind: "changeColor",
        id: args[0],
        color: [
          intArg(args[1], "red channel", 0, 255),
          intArg(args[2], "green channel", 0, 255),
          intArg(args[3], "blue channel", 0, 255),
        ],
      };
    }
    case "activateNode":
      exactly(args, 1, "activateNode");
      return { kind: "activateNode", id: args[0] };
    case "disactivateNode":
      exactly(args, 1, "disactivateNode");
      return { kind: "disactivateNode", id: args[0] };
    case "sendPacket": {
      atLeast(args, 2, "sendPacket");
      const label = args.length > 2 ? args.slice(2).join(" ") : null;
      return { kind: "sendPacket", sender: args[0], receiver: args[1], label };
    }
    case "addNeighbor":
      exactly(args, 2, "addNeighbor");
      return { kind: "addNeighbor", id: args[0], neighbor: args[1] };
    case "resetNeighbors":
      exactly(args, 1, "resetNeighbors");
      return { kind: "resetNeighbors", id: args[0] };
    case "setText":
      atLeast(args, 2, "setText");
      return { kind: "setText", id: args[0], text: args.slice(1).join(" ") };
    case "setBadge": {
      atLeast(args, 3, "setBadge");
      const slot = intArg(args[1], "badge slot", 1, 2) as 1 | 2;
      return { kind: "setBadge", id: args[0], slot, text: args.slice(2).join(" ") };
    }
    default:
      throw new ProtocolError("unknown_command", `unknown command: ${tokens[0]}`);
  }
}
