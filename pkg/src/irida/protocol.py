"""Irida wire protocol: command model, line parser/serializer, stream framing.

The protocol is newline-delimited UTF-8 text. Every command is one line:
a command name followed by space-separated arguments, the first of which
is always a node ID. The same encoding is used on both hops of the
pipeline (nodes -> control unit -> visualizers).

Commands:
    heartBeat <id> [<x> <y>]        liveness pulse; x,y in [0,1] place the node
    changeColor <id> <r> <g> <b>    channels in [0,255]
    activateNode <id>
    disactivateNode <id>            (sic -- wire token kept verbatim)
    sendPacket <sender> <receiver> [<label...>]
    addNeighbor <id> <neighbor>     ("addNeighbour" accepted on input)
    resetNeighbors <id>
    setText <id> <text...>
    setBadge <id> <slot> <text...>  slot is 1 or 2

Trailing free-text fields consume the rest of the line with runs of
whitespace collapsed to single spaces, so every command has exactly one
canonical encoding and parse/serialize round-trip exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

MAX_LINE_BYTES = 4096

_SPLIT = re.compile(r"[ \t]+")
_INT = re.compile(r"^[+-]?[0-9]+$")


class ProtocolError(ValueError):
    """Base class for every protocol parsing failure."""


class UnknownCommand(ProtocolError):
    pass


class ArityError(ProtocolError):
    pass


class RangeError(ProtocolError):
    pass


class NumberFormatError(ProtocolError):
    pass


class EmptyLine(ProtocolError):
    """Raised for blank lines: callers should skip, not count a failure."""


class OversizeLine(ProtocolError):
    """An unterminated line grew past MAX_LINE_BYTES; the buffer was discarded.

    ``lines`` holds any complete lines extracted before the overflow.
    """

    def __init__(self, size: int, lines: list[bytes]):
        super().__init__(f"unterminated line reached {size} bytes (max {MAX_LINE_BYTES})")
        self.lines = lines


def _check_node_id(token: str, what: str = "node id") -> str:
    if not token:
        raise ValueError(f"{what} must be non-empty")
    if any(c in token for c in " \t\r\n"):
        raise ValueError(f"{what} must not contain whitespace: {token!r}")
    return token


def _normalize_text(text: str, what: str) -> str:
    out = " ".join(text.split())
    if not out:
        raise ValueError(f"{what} must be non-empty")
    return out


@dataclass(frozen=True)
class HeartBeat:
    id: str
    position: tuple[float, float] | None = None

    def __post_init__(self):
        _check_node_id(self.id)
        if self.position is not None:
            x, y = (float(self.position[0]), float(self.position[1]))
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise ValueError(f"position out of [0,1]: ({x}, {y})")
            object.__setattr__(self, "position", (x, y))


@dataclass(frozen=True)
class ChangeColor:
    id: str
    color: tuple[int, int, int]

    def __post_init__(self):
        _check_node_id(self.id)
        for channel in self.color:
            if not 0 <= channel <= 255:
                raise ValueError(f"color channel out of [0,255]: {channel}")


@dataclass(frozen=True)
class ActivateNode:
    id: str

    def __post_init__(self):
        _check_node_id(self.id)


@dataclass(frozen=True)
class DisactivateNode:
    id: str

    def __post_init__(self):
        _check_node_id(self.id)


@dataclass(frozen=True)
class SendPacket:
    sender: str
    receiver: str
    label: str | None = None

    def __post_init__(self):
        _check_node_id(self.sender, "sender id")
        _check_node_id(self.receiver, "receiver id")
        if self.label is not None:
            object.__setattr__(self, "label", _normalize_text(self.label, "label"))


@dataclass(frozen=True)
class AddNeighbor:
    id: str
    neighbor: str

    def __post_init__(self):
        _check_node_id(self.id)
        _check_node_id(self.neighbor, "neighbor id")


@dataclass(frozen=True)
class ResetNeighbors:
    id: str

    def __post_init__(self):
        _check_node_id(self.id)


@dataclass(frozen=True)
class SetText:
    id: str
    text: str

    def __post_init__(self):
        _check_node_id(self.id)
        object.__setattr__(self, "text", _normalize_text(self.text, "text"))


@dataclass(frozen=True)
class SetBadge:
    id: str
    slot: int
    text: str

    def __post_init__(self):
        _check_node_id(self.id)
        if self.slot not in (1, 2):
            raise ValueError(f"badge slot must be 1 or 2: {self.slot}")
        object.__setattr__(self, "text", _normalize_text(self.text, "badge text"))


Command = (
    HeartBeat
    | ChangeColor
    | ActivateNode
    | DisactivateNode
    | SendPacket
    | AddNeighbor
    | ResetNeighbors
    | SetText
    | SetBadge
)

COMMAND_NAMES = (
    "heartBeat",
    "changeColor",
    "activateNode",
    "disactivateNode",
    "sendPacket",
    "addNeighbor",
    "resetNeighbors",
    "setText",
    "setBadge",
)

# "addNeighbour" appears on some firmware; accepted on input, never emitted.
ALIASES = {"addNeighbour": "addNeighbor"}


def _int_arg(token: str, what: str, lo: int, hi: int) -> int:
    if not _INT.match(token):
        raise NumberFormatError(f"{what} must be a base-10 integer: {token!r}")
    value = int(token)
    if not lo <= value <= hi:
        raise RangeError(f"{what} out of [{lo},{hi}]: {value}")
    return value


def _float_arg(token: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise NumberFormatError(f"{what} must be a number: {token!r}") from None
    if not (0.0 <= value <= 1.0):
        raise RangeError(f"{what} out of [0,1]: {token!r}")
    return value


def _need_exact(args: list[str], n: int, name: str) -> None:
    if len(args) != n:
        raise ArityError(f"{name} expects {n} arguments, got {len(args)}")


def _need_at_least(args: list[str], n: int, name: str) -> None:
    if len(args) < n:
        raise ArityError(f"{name} expects at least {n} arguments, got {len(args)}")


def parse_line(line: str) -> Command:
    """Parse one protocol line (newline already stripped) into a Command.

    Raises EmptyLine for blank input, UnknownCommand / ArityError /
    RangeError / NumberFormatError otherwise. Never returns a partially
    constructed command.
    """
    stripped = line.strip(" \t")
    if not stripped:
        raise EmptyLine("blank line")
    tokens = _SPLIT.split(stripped)
    name, args = tokens[0], tokens[1:]
    name = ALIASES.get(name, name)

    if name == "heartBeat":
        if len(args) == 1:
            return HeartBeat(id=args[0])
        if len(args) == 3:
            x = _float_arg(args[1], "x position")
            y = _float_arg(args[2], "y position")
            return HeartBeat(id=args[0], position=(x, y))
        raise ArityError(f"heartBeat expects 1 or 3 arguments, got {len(args)}")
    if name == "changeColor":
        _need_exact(args, 4, "changeColor")
        r = _int_arg(args[1], "red channel", 0, 255)
        g = _int_arg(args[2], "green channel", 0, 255)
        b = _int_arg(args[3], "blue channel", 0, 255)
        return ChangeColor(id=args[0], color=(r, g, b))
    if name == "activateNode":
        _need_exact(args, 1, "activateNode")
        return ActivateNode(id=args[0])
    if name == "disactivateNode":
        _need_exact(args, 1, "disactivateNode")
        return DisactivateNode(id=args[0])
    if name == "sendPacket":
        _need_at_least(args, 2, "sendPacket")
        label = " ".join(args[2:]) if len(args) > 2 else None
        return SendPacket(sender=args[0], receiver=args[1], label=label)
    if name == "addNeighbor":
        _need_exact(args, 2, "addNeighbor")
        return AddNeighbor(id=args[0], neighbor=args[1])
    if name == "resetNeighbors":
        _need_exact(args, 1, "resetNeighbors")
        return ResetNeighbors(id=args[0])
    if name == "setText":
        _need_at_least(args, 2, "setText")
        return SetText(id=args[0], text=" ".join(args[1:]))
    if name == "setBadge":
        _need_at_least(args, 3, "setBadge")
        slot = _int_arg(args[1], "badge slot", 1, 2)
        return SetBadge(id=args[0], slot=slot, text=" ".join(args[2:]))
    raise UnknownCommand(f"unknown command: {tokens[0]!r}")


def _fmt_float(x: float) -> str:
    # repr() gives the shortest decimal that round-trips through float()
    return repr(float(x))


def serialize(cmd: Command) -> str:
    """Encode a Command to its canonical single-line form (no newline)."""
    if isinstance(cmd, HeartBeat):
        if cmd.position is None:
            return f"heartBeat {cmd.id}"
        x, y = cmd.position
        return f"heartBeat {cmd.id} {_fmt_float(x)} {_fmt_float(y)}"
    if isinstance(cmd, ChangeColor):
        r, g, b = cmd.color
        return f"changeColor {cmd.id} {r} {g} {b}"
    if isinstance(cmd, ActivateNode):
        return f"activateNode {cmd.id}"
    if isinstance(cmd, DisactivateNode):
        return f"disactivateNode {cmd.id}"
    if isinstance(cmd, SendPacket):
        if cmd.label is None:
            return f"sendPacket {cmd.sender} {cmd.receiver}"
        return f"sendPacket {cmd.sender} {cmd.receiver} {cmd.label}"
    if isinstance(cmd, AddNeighbor):
        return f"addNeighbor {cmd.id} {cmd.neighbor}"
    if isinstance(cmd, ResetNeighbors):
        return f"resetNeighbors {cmd.id}"
    if isinstance(cmd, SetText):
        return f"setText {cmd.id} {cmd.text}"
    if isinstance(cmd, SetBadge):
        return f"setBadge {cmd.id} {cmd.slot} {cmd.text}"
    raise TypeError(f"not a Command: {cmd!r}")


def split_frames(data: bytes, carry: bytes = b"") -> tuple[list[bytes], bytes]:
    """Split a chunk of stream/datagram bytes into complete lines.

    Lines are separated by LF; a preceding CR is stripped. The unterminated
    tail is returned as the new carry for the next call. Raises OversizeLine
    (carrying any complete lines already extracted) if the tail exceeds
    MAX_LINE_BYTES; the oversized buffer is discarded.
    """
    buf = carry + data
    parts = buf.split(b"\n")
    tail = parts.pop()
    lines = [p[:-1] if p.endswith(b"\r") else p for p in parts]
    if len(tail) > MAX_LINE_BYTES:
        raise OversizeLine(len(tail), lines)
    return lines, tail


def decode_line(raw: bytes) -> str:
    """Decode raw line bytes for parsing; invalid UTF-8 is replaced, not fatal."""
    return raw.decode("utf-8", errors="replace")
