"""Visualization model: fold a timestamped command stream into node views.

One NetworkState instance is owned by a single writer that calls apply()
for every incoming command and tick() periodically. Rendering data is read
out through snapshot(), which is deterministic and byte-comparable when
serialized with sorted keys.

Fading is derived at read time (is_active / is_stale flags), never by
deleting state, so a renderer can disable it.
"""

from __future__ import annotations

import copy
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any

from . import protocol as proto

WARN_UNKNOWN_NODE = "unknown_node"
WARN_SELF_LINK = "self_link"

DEFAULT_COLOR = (255, 255, 255)


@dataclass
class FadeConfig:
    """Fade and animation timing, all in seconds.

    Only inactive_alpha (50% for disactivated nodes) is fixed by the
    protocol; the durations are local presentation defaults.
    """

    node_fade: float = 30.0
    link_fade: float = 30.0
    pulse_duration: float = 0.8
    packet_duration: float = 0.6
    inactive_alpha: float = 0.5

    def __post_init__(self):
        for name in ("node_fade", "link_fade", "pulse_duration", "packet_duration"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 <= self.inactive_alpha <= 1.0:
            raise ValueError("inactive_alpha must be in [0,1]")


@dataclass
class NodeView:
    id: str
    position: tuple[float, float]
    color: tuple[int, int, int] = DEFAULT_COLOR
    activated: bool = True
    text: str = ""
    badges: list[str] = field(default_factory=lambda: ["", ""])
    neighbors: dict[str, float] = field(default_factory=dict)  # id -> last_confirmed
    last_activity: float = 0.0


@dataclass
class Pulse:
    node: str
    started: float


@dataclass
class PacketFlight:
    sender: str
    receiver: str
    label: str | None
    started: float


Animation = Pulse | PacketFlight


@dataclass(frozen=True)
class StateEvent:
    """What a single apply() changed; consumed by logs and tests."""

    kind: str
    node: str | None = None
    detail: str | None = None


class NetworkState:
    """Single-writer fold of the command stream into the visual model."""

    def __init__(self, config: FadeConfig | None = None):
        self.config = config or FadeConfig()
        self.nodes: dict[str, NodeView] = {}
        self.animations: list[Animation] = []
        self.warnings: Counter[str] = Counter()

    # -- command folding --------------------------------------------------

    def apply(self, cmd: proto.Command, now: float) -> list[StateEvent]:
        """Fold one command at ingest time `now` (monotone across calls)."""
        if isinstance(cmd, proto.HeartBeat):
            return self._apply_heartbeat(cmd, now)
        if isinstance(cmd, proto.SendPacket):
            return self._apply_packet(cmd, now)

        node = self.nodes.get(cmd.id)
        if node is None:
            return [self._warn(WARN_UNKNOWN_NODE, cmd.id)]
        node.last_activity = now
        if isinstance(cmd, proto.ChangeColor):
            node.color = cmd.color
            return [StateEvent("color", cmd.id)]
        if isinstance(cmd, proto.ActivateNode):
            node.activated = True
            return [StateEvent("activated", cmd.id)]
        if isinstance(cmd, proto.DisactivateNode):
            node.activated = False
            return [StateEvent("disactivated", cmd.id)]
        if isinstance(cmd, proto.SetText):
            node.text = cmd.text
            return [StateEvent("text", cmd.id)]
        if isinstance(cmd, proto.SetBadge):
            node.badges[cmd.slot - 1] = cmd.text
            return [StateEvent("badge", cmd.id, str(cmd.slot))]
        if isinstance(cmd, proto.AddNeighbor):
            if cmd.neighbor == cmd.id:
                return [self._warn(WARN_SELF_LINK, cmd.id)]
            # neighbor may be unknown: store anyway, its heartbeat may be in flight
            node.neighbors[cmd.neighbor] = now
            return [StateEvent("neighbor_added", cmd.id, cmd.neighbor)]
        if isinstance(cmd, proto.ResetNeighbors):
            node.neighbors.clear()
            return [StateEvent("neighbors_reset", cmd.id)]
        raise TypeError(f"not a Command: {cmd!r}")

    def _apply_heartbeat(self, cmd: proto.HeartBeat, now: float) -> list[StateEvent]:
        events = []
        node = self.nodes.get(cmd.id)
        if cmd.position is None:
            if node is None:
                return [self._warn(WARN_UNKNOWN_NODE, cmd.id)]
        elif node is None:
            node = NodeView(id=cmd.id, position=cmd.position)
            self.nodes[cmd.id] = node
            events.append(StateEvent("node_created", cmd.id))
        else:
            node.position = cmd.position
            events.append(StateEvent("node_moved", cmd.id))
        node.last_activity = now
        self.animations.append(Pulse(node=cmd.id, started=now))
        events.append(StateEvent("pulse", cmd.id))
        return events

    def _apply_packet(self, cmd: proto.SendPacket, now: float) -> list[StateEvent]:
        events = []
        sender = self.nodes.get(cmd.sender)
        receiver = self.nodes.get(cmd.receiver)
        if sender is None:
            events.append(self._warn(WARN_UNKNOWN_NODE, cmd.sender))
        else:
            sender.last_activity = now
        if receiver is None:
            events.append(self._warn(WARN_UNKNOWN_NODE, cmd.receiver))
        else:
            receiver.last_activity = now
        if sender is not None:
            self.animations.append(
                PacketFlight(sender=cmd.sender, receiver=cmd.receiver, label=cmd.label, started=now)
            )
            events.append(StateEvent("packet", cmd.sender, cmd.receiver))
        return events

    def _warn(self, kind: str, node: str) -> StateEvent:
        self.warnings[kind] += 1
        return StateEvent("warning", node, kind)

    # -- time passage ------------------------------------------------------

    def _duration(self, anim: Animation) -> float:
        if isinstance(anim, Pulse):
            return self.config.pulse_duration
        return self.config.packet_duration

    def tick(self, now: float) -> None:
        """Drop expired animations. Node/link fading is computed, not destructive."""
        self.animations = [a for a in self.animations if now - a.started < self._duration(a)]

    def is_active(self, node: NodeView, now: float) -> bool:
        return now - node.last_activity <= self.config.node_fade

    def is_stale(self, last_confirmed: float, now: float) -> bool:
        return now - last_confirmed > self.config.link_fade

    # -- read model ---------------------------------------------------------

    def snapshot(self, now: float) -> dict[str, Any]:
        """Serializable view of everything a renderer needs, deterministically ordered."""
        nodes = {}
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            nodes[node_id] = {
                "id": node.id,
                "position": {"x": node.position[0], "y": node.position[1]},
                "color": list(node.color),
                "activated": node.activated,
                "alpha": 1.0 if node.activated else self.config.inactive_alpha,
                "is_active": self.is_active(node, now),
                "text": node.text,
                "badges": list(node.badges),
                "neighbors": {
                    nid: {
                        "last_confirmed": node.neighbors[nid],
                        "is_stale": self.is_stale(node.neighbors[nid], now),
                    }
                    for nid in sorted(node.neighbors)
                },
                "last_activity": node.last_activity,
            }
        animations = []
        for anim in self.animations:
            duration = self._duration(anim)
            progress = (now - anim.started) / duration
            if progress >= 1.0:
                continue
            entry = {"progress": max(progress, 0.0), "started": anim.started}
            if isinstance(anim, Pulse):
                entry.update(kind="pulse", node=anim.node)
            else:
                entry.update(
                    kind="packet", sender=anim.sender, receiver=anim.receiver, label=anim.label
                )
            animations.append(entry)
        return {
            "nodes": nodes,
            "animations": animations,
            "warnings": dict(sorted(self.warnings.items())),
        }


def snapshot_json(doc: dict[str, Any]) -> str:
    """Canonical byte-comparable encoding of a snapshot document."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


_TIME_FIELDS = ("last_activity", "last_confirmed", "started", "progress")


def scrub_snapshot(doc: dict[str, Any]) -> dict[str, Any]:
    """Copy of a snapshot with raw timestamps and animation progress removed.

    Used for comparisons that must hold across sessions whose clocks differ
    (record/replay, client-side mirrors).
    """
    out = copy.deepcopy(doc)
    for node in out.get("nodes", {}).values():
        node.pop("last_activity", None)
        for link in node.get("neighbors", {}).values():
            link.pop("last_confirmed", None)
    for anim in out.get("animations", []):
        anim.pop("started", None)
        anim.pop("progress", None)
    return out


def diff_snapshots(expected: Any, actual: Any, path: str = "$") -> list[str]:
    """Structured field-by-field diff; empty list means equal."""
    diffs: list[str] = []
    if isinstance(expected, dict) and isinstance(actual, dict):
        for key in sorted(set(expected) | set(actual)):
            if key not in expected:
                diffs.append(f"{path}.{key}: unexpected {actual[key]!r}")
            elif key not in actual:
                diffs.append(f"{path}.{key}: missing (expected {expected[key]!r})")
            else:
                diffs.extend(diff_snapshots(expected[key], actual[key], f"{path}.{key}"))
    elif isinstance(expected, list) and isinstance(actual, list):
        if len(expected) != len(actual):
            diffs.append(f"{path}: length {len(actual)} != {len(expected)}")
        for i, (e, a) in enumerate(zip(expected, actual)):
            diffs.extend(diff_snapshots(e, a, f"{path}[{i}]"))
    elif expected != actual:
        diffs.append(f"{path}: {actual!r} != {expected!r}")
    return diffs
