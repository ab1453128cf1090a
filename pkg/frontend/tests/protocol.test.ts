import { describe, expect, it } from "vitest";

import { parseLine, ProtocolError } from "../src/protocol.js";

const REFERENCE: Array<[string, unknown]> = [
  ["heartBeat 0x00 0.5 0.5", { kind: "heartBeat", id: "0x00", position: { x: 0.5, y: 0.5 } }],
  ["heartBeat 0x00", { kind: "heartBeat", id: "0x00", position: null }],
  ["changeColor 0x00 255 0 0", { kind: "changeColor", id: "0x00", color: [255, 0, 0] }],
  ["activateNode 0x00", { kind: "activateNode", id: "0x00" }],
  ["disactivateNode 0x00", { kind: "disactivateNode", id: "0x00" }],
  ["sendPacket 0x00 0x01", { kind: "sendPacket", sender: "0x00", receiver: "0x01", label: null }],
  ["sendPacket 0x00 0x01 Data", { kind: "sendPacket", sender: "0x00", receiver: "0x01", label: "Data" }],
  ["addNeighbor 0x00 0x01", { kind: "addNeighbor", id: "0x00", neighbor: "0x01" }],
  ["resetNeighbors 0x00", { kind: "resetNeighbors", id: "0x00" }],
  ["setText 0x00 Cluster Leader", { kind: "setText", id: "0x00", text: "Cluster Leader" }],
  ["setBadge 0x00 1 20", { kind: "setBadge", id: "0x00", slot: 1, text: "20" }],
];

describe("parseLine", () => {
  it("parses every reference line", () => {
    for (const [line, expected] of REFERENCE) {
      expect(parseLine(line)).toEqual(expected);
    }
  });

  it("accepts the firmware spelling of addNeighbor", () => {
    expect(parseLine("addNeighbour 0x01 0x02")).toEqual({
      kind: "addNeighbor",
      id: "0x01",
      neighbor: "0x02",
    });
  });

  it("returns null for blank lines", () => {
    expect(parseLine("")).toBeNull();
    expect(parseLine("  \t ")).toBeNull();
  });

  it("collapses whitespace in trailing text fields", () => {
    expect(parseLine("setText 0x00 a \t b   c")).toMatchObject({ text: "a b c" });
    expect(parseLine("setBadge 0x00 2 hi   there")).toMatchObject({ slot: 2, text: "hi there" });
  });

  const rejected: Array<[string, string]> = [
    ["bogus 0x00", "unknown_command"],
    ["HEARTBEAT 0x00", "unknown_command"],
    ["heartBeat", "arity"],
    ["heartBeat 0x00 0.5", "arity"],
    ["changeColor 0x00 300 0 0", "range"],
    ["changeColor 0x00 red 0 0", "number_format"],
    ["changeColor 0x00 0x10 0 0", "number_format"],
    ["heartBeat 0x00 1.5 0.5", "range"],
    ["setBadge 0x00 3 x", "range"],
    ["sendPacket 0x00", "arity"],
  ];

  it.each(rejected)("rejects %s", (line, code) => {
    try {
      parseLine(line);
      expect.unreachable(`should have thrown for: ${line}`);
    } catch (err) {
      expect(err).toBeInstanceOf(ProtocolError);
      expect((err as ProtocolError).code).toBe(code);
    }
  });
});
