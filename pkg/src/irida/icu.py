"""Irida Control Unit: ingest protocol lines, fan them out to registered IVUs.

The relay is transparent: whatever bytes arrive as a line leave as the same
bytes plus a trailing newline, to every registered UDP endpoint and every
WebSocket subscriber. Validation (--validate) only counts and logs, it never
drops traffic.

Control plane (UDP request/reply, one line each):
    IVU_REGISTER <udp_port>    -> OK REGISTERED
    IVU_UNREGISTER <udp_port>  -> OK UNREGISTERED | ERR NOT_REGISTERED
    IVU_PING <udp_port>        -> OK PONG         | ERR NOT_REGISTERED
    STATUS                     -> OK STATUS ivus=<n> lines_in=<n> lines_out=<n>
anything else                  -> ERR BAD_REQUEST

Registrations expire when not pinged within the TTL (default 60 s; IVUs
should ping every 15 s).
"""

from __future__ import annotations

import http
import logging
import mimetypes
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Callable

from . import protocol

log = logging.getLogger("irida.icu")

DEFAULT_DATA_PORT = 47000
DEFAULT_CONTROL_PORT = 47001
PING_INTERVAL_SECS = 15.0
EVICT_AFTER_FAILURES = 10
MAX_DATAGRAM = 65535


class IcuError(Exception):
    pass


class BindError(IcuError):
    pass


@dataclass
class IcuConfig:
    data_port: int = DEFAULT_DATA_PORT
    control_port: int = DEFAULT_CONTROL_PORT
    ws_port: int | None = None
    host: str = "0.0.0.0"
    stdin_source: bool = False
    validate: bool = False
    ivu_ttl_secs: float = 60.0
    static_dir: str | None = None


@dataclass
class IvuRegistration:
    endpoint: tuple[str, int]
    registered_at: float
    last_ping: float
    consecutive_failures: int = 0


@dataclass
class IngestSource:
    name: str
    lines_in: int = 0
    parse_failures: int = 0


class IvuRegistry:
    """Registered visualizer endpoints; all mutation under one lock."""

    def __init__(self):
        self._lock = threading.Lock()
        self._regs: dict[tuple[str, int], IvuRegistration] = {}

    def register(self, host: str, port: int, now: float) -> bool:
        """Register an endpoint; re-registering only refreshes the ping time."""
        key = (host, port)
        with self._lock:
            reg = self._regs.get(key)
            if reg is not None:
                reg.last_ping = now
                return False
            self._regs[key] = IvuRegistration(endpoint=key, registered_at=now, last_ping=now)
            return True

    def unregister(self, host: str, port: int) -> bool:
        with self._lock:
            return self._regs.pop((host, port), None) is not None

    def ping(self, host: str, port: int, now: float) -> bool:
        with self._lock:
            reg = self._regs.get((host, port))
            if reg is None:
                return False
            reg.last_ping = now
            return True

    def endpoints(self) -> list[tuple[str, int]]:
        with self._lock:
            return list(self._regs)

    def count(self) -> int:
        with self._lock:
            return len(self._regs)

    def expire(self, now: float, ttl: float) -> list[tuple[str, int]]:
        """Drop registrations whose last ping is older than the TTL."""
        with self._lock:
            dead = [key for key, reg in self._regs.items() if now - reg.last_ping > ttl]
            for key in dead:
                del self._regs[key]
            return dead

    def record_send_failure(self, endpoint: tuple[str, int], limit: int = EVICT_AFTER_FAILURES) -> bool:
        """Count a failed delivery; evict after `limit` consecutive failures."""
        with self._lock:
            reg = self._regs.get(endpoint)
            if reg is None:
                return False
            reg.consecutive_failures += 1
            if reg.consecutive_failures >= limit:
                del self._regs[endpoint]
                return True
            return False

    def record_send_success(self, endpoint: tuple[str, int]) -> None:
        with self._lock:
            reg = self._regs.get(endpoint)
            if reg is not None:
                reg.consecutive_failures = 0


def handle_control_line(
    registry: IvuRegistry,
    line: str,
    source_addr: tuple[str, int],
    now: float,
    stats=None,
) -> str:
    """Process one control-plane request line and produce the reply line."""
    tokens = line.split()
    if len(tokens) == 1 and tokens[0] == "STATUS":
        lines_in = getattr(stats, "lines_in", 0)
        lines_out = getattr(stats, "lines_out", 0)
        return f"OK STATUS ivus={registry.count()} lines_in={lines_in} lines_out={lines_out}"
    if len(tokens) == 2 and tokens[0] in ("IVU_REGISTER", "IVU_UNREGISTER", "IVU_PING"):
        try:
            port = int(tokens[1])
        except ValueError:
            return "ERR BAD_REQUEST"
        if not 1 <= port <= 65535:
            return "ERR BAD_REQUEST"
        host = source_addr[0]
        if tokens[0] == "IVU_REGISTER":
            registry.register(host, port, now)
            return "OK REGISTERED"
        if tokens[0] == "IVU_UNREGISTER":
            return "OK UNREGISTERED" if registry.unregister(host, port) else "ERR NOT_REGISTERED"
        return "OK PONG" if registry.ping(host, port, now) else "ERR NOT_REGISTERED"
    return "ERR BAD_REQUEST"


def _bind_udp(host: str, port: int) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise BindError(f"cannot bind UDP {host}:{port}: {exc}") from exc
    # timeout lets the receive loops notice shutdown promptly
    sock.settimeout(0.25)
    return sock


class IcuServer:
    """Threaded control unit: data/control UDP loops, TTL sweep, WS relay."""

    def __init__(self, config: IcuConfig | None = None, clock: Callable[[], float] = time.monotonic):
        self.config = config or IcuConfig()
        self.clock = clock
        self.registry = IvuRegistry()
        self.lines_in = 0
        self.lines_out = 0
        self.ws_out = 0
        self.parse_failures = 0
        self.control_errors = 0
        self.sources: dict[str, IngestSource] = {}
        self._stats_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._ws_server = None
        self._ws_lock = threading.Lock()
        self._ws_subs: list[queue.Queue] = []
        self._ws_port: int | None = None

        self._data_sock = _bind_udp(self.config.host, self.config.data_port)
        try:
            self._ctrl_sock = _bind_udp(self.config.host, self.config.control_port)
        except BindError:
            self._data_sock.close()
            raise
        self._send_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    # -- addresses ----------------------------------------------------------

    @property
    def data_port(self) -> int:
        return self._data_sock.getsockname()[1]

    @property
    def control_port(self) -> int:
        return self._ctrl_sock.getsockname()[1]

    @property
    def ws_port(self) -> int | None:
        return self._ws_port

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        if self.config.ws_port is not None:
            self._start_ws()
        self._spawn(self._data_loop, "icu-data")
        self._spawn(self._ctrl_loop, "icu-control")
        self._spawn(self._sweep_loop, "icu-sweep")
        log.info(
            "ICU up: data udp/%d control udp/%d ws %s",
            self.data_port,
            self.control_port,
            self._ws_port if self._ws_port is not None else "off",
        )

    def _spawn(self, target, name) -> None:
        t = threading.Thread(target=target, name=name, daemon=True)
        t.start()
        self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        self._data_sock.close()
        self._ctrl_sock.close()
        if self._ws_server is not None:
            with self._ws_lock:
                for q in self._ws_subs:
                    q.put(None)
            self._ws_server.shutdown()
        for t in self._threads:
            t.join(timeout=2.0)
        self._send_sock.close()
        log.info(
            "ICU down: lines_in=%d lines_out=%d ws_out=%d parse_failures=%d control_errors=%d",
            self.lines_in,
            self.lines_out,
            self.ws_out,
            self.parse_failures,
            self.control_errors,
        )

    def wait(self, timeout: float | None = None) -> bool:
        return self._stop.wait(timeout)

    # -- ingest -> fanout ------------------------------------------------------

    def _source(self, name: str) -> IngestSource:
        src = self.sources.get(name)
        if src is None:
            src = self.sources[name] = IngestSource(name=name)
        return src

    def ingest_line(self, raw: bytes, source_name: str) -> int:
        """Count one ingested line, optionally validate, always fan out."""
        src = self._source(source_name)
        with self._stats_lock:
            src.lines_in += 1
            self.lines_in += 1
        if self.config.validate:
            try:
                protocol.parse_line(protocol.decode_line(raw))
            except protocol.ProtocolError as exc:
                with self._stats_lock:
                    src.parse_failures += 1
                    self.parse_failures += 1
                log.warning("unparseable line from %s (still forwarded): %s", source_name, exc)
        return self.fanout(raw)

    def fanout(self, raw: bytes) -> int:
        """Deliver one line to every registered IVU and WS subscriber."""
        payload = raw + b"\n"
        sent = 0
        for endpoint in self.registry.endpoints():
            try:
                self._send_sock.sendto(payload, endpoint)
            except OSError as exc:
                evicted = self.registry.record_send_failure(endpoint)
                log.warning("send to %s failed (%s)%s", endpoint, exc, "; evicted" if evicted else "")
            else:
                sent += 1
                self.registry.record_send_success(endpoint)
        with self._stats_lock:
            self.lines_out += sent
        if self._ws_subs:
            text = protocol.decode_line(raw)
            with self._ws_lock:
                subs = list(self._ws_subs)
            for q in subs:
                try:
                    q.put_nowait(text)
                    with self._stats_lock:
                        self.ws_out += 1
                except queue.Full:
                    log.warning("websocket subscriber lagging; dropped a line")
        return sent

    def ingest_chunks(self, chunks, source_name: str) -> None:
        """Feed a byte-chunk iterable (stream framing with carry) into the relay."""
        carry = b""
        for chunk in chunks:
            try:
                lines, carry = protocol.split_frames(chunk, carry)
            except protocol.OversizeLine as exc:
                lines, carry = exc.lines, b""
                log.warning("oversize line from %s discarded", source_name)
            for raw in lines:
                if raw.strip(b" \t"):
                    self.ingest_line(raw, source_name)

    def ingest_stream(self, fp: BinaryIO, source_name: str) -> None:
        def chunks():
            while not self._stop.is_set():
                data = fp.read1(4096) if hasattr(fp, "read1") else fp.read(4096)
                if not data:
                    return
                yield data

        self.ingest_chunks(chunks(), source_name)

    # -- loops ---------------------------------------------------------------

    def _data_loop(self) -> None:
        source = f"udp:{self.data_port}"
        while not self._stop.is_set():
            try:
                data, _addr = self._data_sock.recvfrom(MAX_DATAGRAM)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                lines, tail = protocol.split_frames(data, b"")
            except protocol.OversizeLine as exc:
                lines, tail = exc.lines, b""
            if tail:
                # datagrams are self-contained; a missing final newline is tolerated
                lines.append(tail)
            for raw in lines:
                if raw.strip(b" \t"):
                    self.ingest_line(raw, source)

    def _ctrl_loop(self) -> None:
        while not self._stop.is_set():
            try:
                data, addr = self._ctrl_sock.recvfrom(MAX_DATAGRAM)
            except socket.timeout:
                continue
            except OSError:
                break
            line = protocol.decode_line(data).strip()
            reply = handle_control_line(self.registry, line, addr, self.clock(), stats=self)
            if reply.startswith("ERR"):
                with self._stats_lock:
                    self.control_errors += 1
            try:
                self._ctrl_sock.sendto(reply.encode("utf-8") + b"\n", addr)
            except OSError:
                pass

    def _sweep_loop(self) -> None:
        interval = max(0.25, min(1.0, self.config.ivu_ttl_secs / 4))
        while not self._stop.wait(interval):
            for endpoint in self.registry.expire(self.clock(), self.config.ivu_ttl_secs):
                log.info("registration expired: %s", endpoint)

    # -- websocket relay --------------------------------------------------------

    def _start_ws(self) -> None:
        from websockets.sync.server import serve

        def handler(conn):
            q: queue.Queue = queue.Queue(maxsize=1024)
            remote = conn.remote_address  # unreadable once the socket closes
            with self._ws_lock:
                self._ws_subs.append(q)
            log.info("websocket subscriber connected: %s", remote)
            try:
                while True:
                    item = q.get()
                    if item is None:
                        break
                    conn.send(item)
            except Exception:
                pass
            finally:
                with self._ws_lock:
                    if q in self._ws_subs:
                        self._ws_subs.remove(q)
                log.info("websocket subscriber gone: %s", remote)

        try:
            self._ws_server = serve(
                handler,
                self.config.host,
                self.config.ws_port,
                process_request=self._process_http,
            )
        except OSError as exc:
            raise BindError(f"cannot bind WS {self.config.host}:{self.config.ws_port}: {exc}") from exc
        self._ws_port = self._ws_server.socket.getsockname()[1]
        self._spawn(self._ws_server.serve_forever, "icu-ws")

    def _process_http(self, conn, request):
        upgrade = request.headers.get("Upgrade", "")
        if upgrade.lower() == "websocket":
            if request.path.split("?", 1)[0] == "/stream":
                return None  # proceed with the websocket handshake
            return conn.respond(http.HTTPStatus.NOT_FOUND, "unknown websocket path; use /stream\n")
        return self._serve_static(conn, request)

    def _serve_static(self, conn, request):
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        path = request.path.split("?", 1)[0]
        if self.config.static_dir is None:
            if path == "/":
                return conn.respond(
                    http.HTTPStatus.OK,
                    f"Irida ICU. WebSocket stream at ws://<host>:{self._ws_port or self.config.ws_port}/stream\n",
                )
            return conn.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
        root = Path(self.config.static_dir).resolve()
        name = path.lstrip("/") or "index.html"
        target = (root / name).resolve()
        if root not in target.parents and target != root:
            return conn.respond(http.HTTPStatus.FORBIDDEN, "forbidden\n")
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            return conn.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        body = target.read_bytes()
        headers = Headers()
        headers["Content-Type"] = ctype
        headers["Content-Length"] = str(len(body))
        return Response(200, "OK", headers, body)


def run_icu(config: IcuConfig, stop_event: threading.Event | None = None) -> None:
    """Run the control unit until interrupted (or `stop_event` is set)."""
    server = IcuServer(config)
    server.start()
    if config.stdin_source:
        import sys

        threading.Thread(
            target=server.ingest_stream, args=(sys.stdin.buffer, "stdin"), daemon=True
        ).start()
    try:
        while not server.wait(0.2):
            if stop_event is not None and stop_event.is_set():
                break
    except KeyboardInterrupt:
        log.info("interrupted")
    finally:
        server.stop()
