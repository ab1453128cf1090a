"""Renderer-free visualizer: registers with an ICU, folds the stream into a
NetworkState, and provides record, replay, and snapshot facilities.

The journal format is JSON lines, one object per received protocol line:
    {"t": <int ms since recording start>, "line": "<verbatim line>"}
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import netstate, protocol

log = logging.getLogger("irida.ivu")

REGISTER_TIMEOUT = 1.0
REGISTER_BACKOFF_MAX = 5.0


class JournalError(ValueError):
    pass


@dataclass(frozen=True)
class EventRecord:
    t: int  # milliseconds since recording start
    line: str

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("t must be >= 0")
        if "\n" in self.line or "\r" in self.line:
            raise ValueError("line must not contain newlines")


class JournalWriter:
    """Append-only JSON-lines journal; one flush per record for crash safety."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fp = self.path.open("w", encoding="utf-8")

    def append(self, record: EventRecord) -> None:
        self._fp.write(json.dumps({"t": record.t, "line": record.line}) + "\n")
        self._fp.flush()

    def close(self) -> None:
        self._fp.close()


def read_journal(path: str | Path) -> list[EventRecord]:
    """Load and validate a journal; malformed input aborts with its position."""
    records: list[EventRecord] = []
    last_t = 0
    with open(path, encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                if not isinstance(obj, dict):
                    raise ValueError("not an object")
                t, line = obj["t"], obj["line"]
                if not isinstance(t, int) or isinstance(t, bool):
                    raise ValueError("t must be an integer")
                if not isinstance(line, str):
                    raise ValueError("line must be a string")
                record = EventRecord(t=t, line=line)
            except (ValueError, KeyError) as exc:
                raise JournalError(f"{path}: line {lineno}: {exc}") from None
            if record.t < last_t:
                raise JournalError(f"{path}: line {lineno}: timestamps went backwards")
            last_t = record.t
            records.append(record)
    return records


def replay(
    journal_path: str | Path,
    target: tuple[str, int],
    speed: float = 1.0,
    instant: bool = False,
) -> int:
    """Re-emit a journal over UDP at t/speed offsets; returns lines sent."""
    if not instant and speed <= 0:
        raise ValueError("speed must be > 0")
    records = read_journal(journal_path)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        start = time.monotonic()
        for record in records:
            if not instant:
                lag = start + record.t / 1000.0 / speed - time.monotonic()
                if lag > 0:
                    time.sleep(lag)
            sock.sendto(record.line.encode("utf-8") + b"\n", target)
    finally:
        sock.close()
    return len(records)


class HeadlessIvu:
    """Receives the stream on a UDP port and folds it into a NetworkState.

    With `icu_control` set, registers on start, pings every 15 s, and
    unregisters on stop. Without it, the instance just listens (replay sink).
    """

    def __init__(
        self,
        icu_control: tuple[str, int] | None = None,
        local_port: int = 0,
        host: str = "0.0.0.0",
        fade_config: netstate.FadeConfig | None = None,
        record_path: str | Path | None = None,
        ping_interval: float = 15.0,
        tick_hz: float = 10.0,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.icu_control = icu_control
        self.clock = clock
        self.ping_interval = ping_interval
        self.tick_interval = 1.0 / tick_hz
        self.state = netstate.NetworkState(fade_config)
        self.lines_received = 0
        self.parse_failures = 0
        self.registered = False
        self._state_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._journal: JournalWriter | None = JournalWriter(record_path) if record_path else None
        self._record_start: float | None = None

        self._data_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        # burst tolerance for replays; the kernel caps this to rmem_max
        self._data_sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 22)
        self._data_sock.bind((host, local_port))
        self._data_sock.settimeout(0.05)
        self._ctrl_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._ctrl_sock.settimeout(REGISTER_TIMEOUT)

    @property
    def port(self) -> int:
        return self._data_sock.getsockname()[1]

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run, name="ivu-headless", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def run(self) -> None:
        try:
            if self.icu_control is not None:
                self._register()
            next_tick = self.clock() + self.tick_interval
            next_ping = self.clock() + self.ping_interval
            while not self._stop.is_set():
                try:
                    data, _addr = self._data_sock.recvfrom(65535)
                except socket.timeout:
                    data = None
                except OSError:
                    break
                if data is not None:
                    self._handle_datagram(data)
                now = self.clock()
                if now >= next_tick:
                    with self._state_lock:
                        self.state.tick(now)
                    next_tick = now + self.tick_interval
                if self.registered and now >= next_ping:
                    self._send_control(f"IVU_PING {self.port}")
                    self._drain_control()
                    next_ping = now + self.ping_interval
        finally:
            if self.registered:
                self._send_control(f"IVU_UNREGISTER {self.port}")
                self._drain_control()
                self.registered = False
            if self._journal is not None:
                self._journal.close()
            self._data_sock.close()
            self._ctrl_sock.close()

    # -- stream handling ---------------------------------------------------------

    def _handle_datagram(self, data: bytes) -> None:
        try:
            lines, tail = protocol.split_frames(data, b"")
        except protocol.OversizeLine as exc:
            lines, tail = exc.lines, b""
        if tail:
            lines.append(tail)
        for raw in lines:
            if not raw.strip(b" \t"):
                continue
            self._handle_line(protocol.decode_line(raw))

    def _handle_line(self, line: str) -> None:
        self.lines_received += 1
        now = self.clock()
        if self._journal is not None:
            if self._record_start is None:
                self._record_start = now
            try:
                self._journal.append(EventRecord(t=int((now - self._record_start) * 1000), line=line))
            except OSError as exc:
                log.error("journal write failed, recording aborted: %s", exc)
                self._journal = None
        try:
            cmd = protocol.parse_line(line)
        except protocol.EmptyLine:
            return
        except protocol.ProtocolError as exc:
            self.parse_failures += 1
            log.debug("unparseable line skipped: %s", exc)
            return
        with self._state_lock:
            self.state.apply(cmd, now)

    # -- registration -------------------------------------------------------------

    def _send_control(self, request: str) -> None:
        try:
            self._ctrl_sock.sendto(request.encode("utf-8") + b"\n", self.icu_control)
        except OSError as exc:
            log.warning("control send failed: %s", exc)

    def _drain_control(self) -> str | None:
        try:
            data, _ = self._ctrl_sock.recvfrom(65535)
            return protocol.decode_line(data).strip()
        except (socket.timeout, OSError):
            return None

    def _register(self) -> None:
        backoff = 0.5
        while not self._stop.is_set():
            self._send_control(f"IVU_REGISTER {self.port}")
            reply = self._drain_control()
            if reply == "OK REGISTERED":
                self.registered = True
                log.info("registered with ICU %s as udp/%d", self.icu_control, self.port)
                return
            log.warning("registration failed (%r), retrying in %.1f s", reply, backoff)
            if self._stop.wait(backoff):
                return
            backoff = min(backoff * 2, REGISTER_BACKOFF_MAX)

    # -- snapshots ---------------------------------------------------------------

    def snapshot(self, now: float | None = None) -> dict:
        with self._state_lock:
            return self.state.snapshot(self.clock() if now is None else now)

    def dump_snapshot(self, path: str | Path, now: float | None = None) -> None:
        doc = self.snapshot(now)
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def assert_snapshot(self, expected_path: str | Path, now: float | None = None) -> tuple[bool, list[str]]:
        """Compare against a stored snapshot, ignoring timestamps and progress."""
        expected = json.loads(Path(expected_path).read_text(encoding="utf-8"))
        diffs = compare_snapshots(expected, self.snapshot(now))
        return not diffs, diffs


def compare_snapshots(expected: dict, actual: dict) -> list[str]:
    """Timestamp-insensitive snapshot equality; returns a structured diff."""
    return netstate.diff_snapshots(netstate.scrub_snapshot(expected), netstate.scrub_snapshot(actual))


def run_headless(
    icu_control: tuple[str, int] | None,
    local_port: int,
    record_path: str | Path | None = None,
    dump_on_exit: str | Path | None = None,
    fade_config: netstate.FadeConfig | None = None,
    stop_event: threading.Event | None = None,
) -> HeadlessIvu:
    """Run a headless IVU until interrupted; returns the (stopped) instance."""
    ivu = HeadlessIvu(
        icu_control=icu_control,
        local_port=local_port,
        fade_config=fade_config,
        record_path=record_path,
    )
    ivu.start()
    log.info("headless IVU listening on udp/%d", ivu.port)
    try:
        while not (stop_event.is_set() if stop_event is not None else False):
            time.sleep(0.2)
    except KeyboardInterrupt:
        log.info("interrupted")
    finally:
        ivu.stop()
        if dump_on_exit is not None:
            ivu.dump_snapshot(dump_on_exit)
    return ivu
