"""Simulated node network running the proof-of-concept firmware.

N nodes sit on a grid. Each node periodically clears its neighbour list,
broadcasts a Hello, and collects Hello_too replies from nodes within a
Manhattan-distance threshold. A shake of the (virtual) accelerometer
past a threshold floods a "forward" message through the network with
per-message dedup to stop loops. Every interesting moment emits one
protocol line, exactly as the real firmware would over its debug link.

The whole simulation is event-driven over a virtual clock and fully
determined by (config, seed, injected shake script). Radio reachability
is a Chebyshev-range footprint (defaults to the whole grid); the
Manhattan threshold is an application-level filter on top of it.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import random
import socket
import threading
import time
from collections import Counter, deque
from dataclasses import dataclass
from typing import Callable

from .protocol import (
    AddNeighbor,
    ChangeColor,
    Command,
    HeartBeat,
    ResetNeighbors,
    SendPacket,
    serialize,
)

log = logging.getLogger("irida.sim")

RED = (255, 0, 0)
BLUE = (0, 0, 255)

Cell = tuple[int, int]


class ConfigError(ValueError):
    pass


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass
class SimConfig:
    grid_width: int = 4
    grid_height: int = 4
    hello_period: float = 15.0        # seconds between neighbourhood refreshes
    hello_jitter_max: float = 5.0     # uniform extra delay per round, per node
    listen_base: float = 1.0          # processing delay before a radio msg is handled
    listen_jitter_max: float = 0.2
    extra_read_window: float = 1.0    # busy window after a send (deaf_while_busy)
    heartbeat_period: float = 5.0
    neighbor_distance_max: int = 2    # Manhattan filter for Hello replies
    radio_range: int | None = None    # Chebyshev reach; None = whole grid
    loss_probability: float = 0.0
    deaf_while_busy: bool = False
    accel_threshold: float = 1.0
    dedup_capacity: int = 32
    seed: int = 0
    icu_endpoint: tuple[str, int] | None = None
    time_scale: float = 1.0           # wall seconds per virtual second; 0 = flat out

    def validate(self) -> None:
        if self.grid_width < 1 or self.grid_height < 1:
            raise ConfigError("grid dimensions must be >= 1")
        for name in (
            "hello_period",
            "hello_jitter_max",
            "listen_base",
            "listen_jitter_max",
            "extra_read_window",
            "heartbeat_period",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ConfigError("loss_probability must be in [0,1]")
        if self.dedup_capacity < 1:
            raise ConfigError("dedup_capacity must be >= 1")
        if self.neighbor_distance_max < 0:
            raise ConfigError("neighbor_distance_max must be >= 0")
        if self.radio_range is not None and self.radio_range < 0:
            raise ConfigError("radio_range must be >= 0")
        if self.time_scale < 0:
            raise ConfigError("time_scale must be >= 0")

    @property
    def effective_radio_range(self) -> int:
        if self.radio_range is not None:
            return self.radio_range
        return max(self.grid_width, self.grid_height)


@dataclass(frozen=True)
class Hello:
    sender: str
    cell: Cell


@dataclass(frozen=True)
class HelloToo:
    sender: str
    to: str


@dataclass(frozen=True)
class Forward:
    origin: str
    seq: int
    sender: str


RadioMsg = Hello | HelloToo | Forward


class SimNode:
    def __init__(self, node_id: str, cell: Cell, rng: random.Random, dedup_capacity: int):
        self.id = node_id
        self.cell = cell
        self.rng = rng
        self.neighbors: set[str] = set()
        self.dedup: deque[tuple[str, int]] = deque(maxlen=dedup_capacity)
        self.accel_baseline = 0.0
        self.next_seq = 0
        self.sent_first_heartbeat = False
        self.busy_until = 0.0

    def __repr__(self):
        return f"SimNode({self.id} @ {self.cell})"


def node_id_for(index: int) -> str:
    return f"0x{index:02x}"


class Simulation:
    """Deterministic event loop over the simulated node grid.

    `emit` receives every protocol line as (virtual_time_seconds, line).
    """

    def __init__(self, config: SimConfig, emit: Callable[[float, str], None]):
        config.validate()
        self.config = config
        self._emit_line = emit
        self.now = 0.0
        self._heap: list = []
        self._order = itertools.count()
        self._radio_rng = random.Random(f"{config.seed}/radio")

        self.nodes: dict[str, SimNode] = {}
        self.node_order: list[str] = []
        for index in range(config.grid_width * config.grid_height):
            node_id = node_id_for(index)
            cell = (index % config.grid_width, index // config.grid_width)
            if node_id in self.nodes:
                raise ConfigError(f"duplicate node id {node_id}")
            self.nodes[node_id] = SimNode(
                node_id, cell, random.Random(f"{config.seed}/{node_id}"), config.dedup_capacity
            )
            self.node_order.append(node_id)

        self.stats = {
            "hello_tx": 0,
            "hello_too_tx": 0,
            "forward_tx": Counter(),
            "deliveries": 0,
            "dropped_loss": 0,
            "dropped_busy": 0,
            "dedup_drops": Counter(),
            "lines": 0,
        }

    # -- plumbing -------------------------------------------------------------

    def schedule(self, at: float, fn: Callable[[], None]) -> None:
        heapq.heappush(self._heap, (at, next(self._order), fn))

    def emit(self, cmd: Command) -> None:
        self.stats["lines"] += 1
        self._emit_line(self.now, serialize(cmd))

    def start(self) -> None:
        """Schedule boot-time behaviour for every node (row-major order)."""
        for node_id in self.node_order:
            node = self.nodes[node_id]
            self.schedule(0.0, lambda n=node: self.heartbeat_tick(n))
            self.schedule(0.0, lambda n=node: self.hello_round(n))

    # -- radio model --------------------------------------------------------------

    def _mark_busy(self, node: SimNode) -> None:
        node.busy_until = max(node.busy_until, self.now + self.config.extra_read_window)

    def _deliver(self, receiver: SimNode, msg: RadioMsg) -> None:
        if self.config.loss_probability and self._radio_rng.random() < self.config.loss_probability:
            self.stats["dropped_loss"] += 1
            return
        delay = self.config.listen_base + receiver.rng.uniform(0, self.config.listen_jitter_max)

        def arrive():
            if self.config.deaf_while_busy and self.now < receiver.busy_until:
                self.stats["dropped_busy"] += 1
                return
            self.on_receive(receiver, msg)

        self.schedule(self.now + delay, arrive)

    def broadcast(self, sender: SimNode, msg: RadioMsg) -> None:
        self._mark_busy(sender)
        reach = self.config.effective_radio_range
        for node_id in self.node_order:
            node = self.nodes[node_id]
            if node is sender:
                continue
            if chebyshev(sender.cell, node.cell) <= reach:
                self._deliver(node, msg)

    def unicast(self, sender: SimNode, target_id: str, msg: RadioMsg) -> None:
        self._mark_busy(sender)
        target = self.nodes.get(target_id)
        if target is None or target is sender:
            return
        if chebyshev(sender.cell, target.cell) <= self.config.effective_radio_range:
            self._deliver(target, msg)

    # -- firmware behaviour ---------------------------------------------------------

    def hello_round(self, node: SimNode) -> None:
        """Clear the neighbour list, announce ourselves, schedule the next round."""
        node.neighbors.clear()
        self.emit(ResetNeighbors(id=node.id))
        self.stats["hello_tx"] += 1
        self.broadcast(node, Hello(sender=node.id, cell=node.cell))
        jitter = node.rng.uniform(0, self.config.hello_jitter_max)
        self.schedule(self.now + self.config.hello_period + jitter, lambda: self.hello_round(node))

    def heartbeat_tick(self, node: SimNode) -> None:
        if node.sent_first_heartbeat:
            self.emit(HeartBeat(id=node.id))
        else:
            x = (node.cell[0] + 0.5) / self.config.grid_width
            y = (node.cell[1] + 0.5) / self.config.grid_height
            self.emit(HeartBeat(id=node.id, position=(x, y)))
            node.sent_first_heartbeat = True
        self.schedule(self.now + self.config.heartbeat_period, lambda: self.heartbeat_tick(node))

    def on_receive(self, node: SimNode, msg: RadioMsg) -> None:
        self.stats["deliveries"] += 1
        if isinstance(msg, Hello):
            if manhattan(node.cell, msg.cell) <= self.config.neighbor_distance_max:
                self.emit(SendPacket(sender=node.id, receiver=msg.sender, label="Hello_too"))
                self.stats["hello_too_tx"] += 1
                self.unicast(node, msg.sender, HelloToo(sender=node.id, to=msg.sender))
            return
        if isinstance(msg, HelloToo):
            node.neighbors.add(msg.sender)
            self.emit(AddNeighbor(id=node.id, neighbor=msg.sender))
            return
        if isinstance(msg, Forward):
            self.emit(SendPacket(sender=msg.sender, receiver=node.id, label="forward"))
            key = (msg.origin, msg.seq)
            if key in node.dedup:
                self.stats["dedup_drops"][node.id] += 1
                return
            node.dedup.append(key)
            if node.id != msg.origin:
                self.emit(ChangeColor(id=node.id, color=BLUE))
            self.stats["forward_tx"][node.id] += 1
            self.broadcast(node, Forward(origin=msg.origin, seq=msg.seq, sender=node.id))
            return
        raise TypeError(f"not a RadioMsg: {msg!r}")

    def trigger_event(self, node: SimNode, new_accel_sum: float) -> None:
        """Inject an accelerometer reading; flood if it moved past the threshold."""
        if abs(new_accel_sum - node.accel_baseline) > self.config.accel_threshold:
            seq = node.next_seq
            node.next_seq += 1
            node.dedup.append((node.id, seq))
            self.emit(ChangeColor(id=node.id, color=RED))
            self.stats["forward_tx"][node.id] += 1
            self.broadcast(node, Forward(origin=node.id, seq=seq, sender=node.id))
        node.accel_baseline = new_accel_sum

    # -- event loop -------------------------------------------------------------------

    def run_until(
        self,
        stop_time: float | None,
        pace: float = 0.0,
        stop_event: threading.Event | None = None,
    ) -> None:
        """Drain events up to stop_time (virtual seconds), pacing if pace > 0."""
        wall_start = time.monotonic()
        while self._heap:
            if stop_event is not None and stop_event.is_set():
                break
            at = self._heap[0][0]
            if stop_time is not None and at > stop_time:
                break
            if pace > 0:
                lag = wall_start + at * pace - time.monotonic()
                if lag > 0:
                    if stop_event is not None:
                        if stop_event.wait(lag):
                            break
                    else:
                        time.sleep(lag)
            _, _, fn = heapq.heappop(self._heap)
            self.now = at
            fn()
        if stop_time is not None and stop_time > self.now:
            self.now = stop_time


# -- scripted runs -------------------------------------------------------------

Shake = tuple[float, str, float]  # (at_seconds, node_id, accel_value)


@dataclass
class ScriptResult:
    lines: list[tuple[float, str]]
    stats: dict
    duration: float
    neighbors: dict[str, set[str]]  # final per-node neighbour sets
    cells: dict[str, Cell]

    def raw_lines(self) -> list[str]:
        return [line for _, line in self.lines]


def parse_script(text: str) -> tuple[list[Shake], float]:
    """Parse an event script: "at <ms> shake <nodeid> <value>" / "stop <ms>"."""
    shakes: list[Shake] = []
    stop: float | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        try:
            if tokens[0] == "at" and len(tokens) == 5 and tokens[2] == "shake":
                shakes.append((float(tokens[1]) / 1000.0, tokens[3], float(tokens[4])))
                continue
            if tokens[0] == "stop" and len(tokens) == 2:
                if stop is not None:
                    raise ConfigError(f"script line {lineno}: duplicate stop")
                stop = float(tokens[1]) / 1000.0
                continue
        except ValueError as exc:
            raise ConfigError(f"script line {lineno}: {exc}") from None
        raise ConfigError(f"script line {lineno}: unrecognized directive: {line!r}")
    if stop is None:
        raise ConfigError("script must contain a 'stop <ms>' directive")
    return shakes, stop


def run_scripted(config: SimConfig, shakes: list[Shake], stop: float) -> ScriptResult:
    """Run to a virtual stop time, collecting every emitted line."""
    lines: list[tuple[float, str]] = []
    sim = Simulation(config, lambda t, line: lines.append((t, line)))
    for at, node_id, value in shakes:
        node = sim.nodes.get(node_id)
        if node is None:
            raise ConfigError(f"shake targets unknown node {node_id}")
        if at < 0:
            raise ConfigError("shake time must be >= 0")
        sim.schedule(at, lambda n=node, v=value: sim.trigger_event(n, v))
    sim.start()
    sim.run_until(stop)
    return ScriptResult(
        lines=lines,
        stats=sim.stats,
        duration=stop,
        neighbors={nid: set(node.neighbors) for nid, node in sim.nodes.items()},
        cells={nid: node.cell for nid, node in sim.nodes.items()},
    )


def run_simulation(
    config: SimConfig,
    script_text: str | None = None,
    stop_event: threading.Event | None = None,
) -> ScriptResult | None:
    """Scripted mode returns the collected lines; live mode streams to the ICU."""
    if script_text is not None:
        shakes, stop = parse_script(script_text)
        return run_scripted(config, shakes, stop)
    if config.icu_endpoint is None:
        raise ConfigError("live mode needs an ICU endpoint (or use a script)")
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    endpoint = config.icu_endpoint

    def send(_t: float, line: str) -> None:
        try:
            sock.sendto(line.encode("utf-8") + b"\n", endpoint)
        except OSError as exc:
            log.warning("emit to %s failed: %s", endpoint, exc)

    sim = Simulation(config, send)
    sim.start()
    log.info(
        "simulating %dx%d nodes -> udp://%s:%d (time_scale=%g)",
        config.grid_width,
        config.grid_height,
        endpoint[0],
        endpoint[1],
        config.time_scale,
    )
    try:
        sim.run_until(None, pace=config.time_scale, stop_event=stop_event)
    except KeyboardInterrupt:
        log.info("interrupted")
    finally:
        sock.close()
    return None
