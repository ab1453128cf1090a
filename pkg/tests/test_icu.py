"""Tests for the control unit: registry, control grammar, fanout, WS relay."""

import io
import socket
import time

import pytest

from irida.icu import (
    BindError,
    IcuConfig,
    IcuServer,
    IvuRegistry,
    handle_control_line,
)


def make_server(**kwargs) -> IcuServer:
    cfg = IcuConfig(data_port=0, control_port=0, host="127.0.0.1", **kwargs)
    server = IcuServer(cfg)
    server.start()
    return server


def udp_socket(timeout=2.0) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(("127.0.0.1", 0))
    sock.settimeout(timeout)
    return sock


def control(server, sock, request: str) -> str:
    sock.sendto(request.encode(), ("127.0.0.1", server.control_port))
    reply, _ = sock.recvfrom(65535)
    return reply.decode().rstrip("\n")


def register(server, sock) -> None:
    port = sock.getsockname()[1]
    assert control(server, sock, f"IVU_REGISTER {port}") == "OK REGISTERED"


def recv_lines(sock, n, timeout=3.0) -> list[bytes]:
    got = []
    deadline = time.monotonic() + timeout
    while len(got) < n and time.monotonic() < deadline:
        try:
            data, _ = sock.recvfrom(65535)
        except socket.timeout:
            break
        got.append(data)
    return got


# -- registry ---------------------------------------------------------------


def test_registry_register_idempotent():
    reg = IvuRegistry()
    assert reg.register("10.0.0.5", 52000, 1.0) is True
    assert reg.register("10.0.0.5", 52000, 2.0) is False
    assert reg.count() == 1
    assert reg.endpoints() == [("10.0.0.5", 52000)]


def test_registry_ttl_expiry_with_mock_clock():
    reg = IvuRegistry()
    reg.register("10.0.0.5", 52000, 0.0)
    reg.register("10.0.0.6", 52000, 30.0)
    assert reg.expire(now=60.0, ttl=60.0) == []  # exactly at ttl: still alive
    assert reg.expire(now=60.1, ttl=60.0) == [("10.0.0.5", 52000)]
    reg.ping("10.0.0.6", 52000, 89.0)
    assert reg.expire(now=149.0, ttl=60.0) == []
    assert reg.expire(now=149.2, ttl=60.0) == [("10.0.0.6", 52000)]
    assert reg.count() == 0


def test_registry_eviction_after_consecutive_failures():
    reg = IvuRegistry()
    reg.register("h", 1, 0.0)
    for _ in range(9):
        assert reg.record_send_failure(("h", 1)) is False
    reg.record_send_success(("h", 1))  # success resets the streak
    for _ in range(9):
        assert reg.record_send_failure(("h", 1)) is False
    assert reg.record_send_failure(("h", 1)) is True
    assert reg.count() == 0


# -- control grammar ----------------------------------------------------------


def test_control_grammar():
    reg = IvuRegistry()
    src = ("10.0.0.5", 39999)
    assert handle_control_line(reg, "IVU_REGISTER 52000", src, 1.0) == "OK REGISTERED"
    assert reg.endpoints() == [("10.0.0.5", 52000)]
    assert handle_control_line(reg, "IVU_PING 52000", src, 2.0) == "OK PONG"
    assert handle_control_line(reg, "STATUS", src, 2.0) == "OK STATUS ivus=1 lines_in=0 lines_out=0"
    assert handle_control_line(reg, "IVU_UNREGISTER 52000", src, 3.0) == "OK UNREGISTERED"
    assert handle_control_line(reg, "IVU_UNREGISTER 52000", src, 3.0) == "ERR NOT_REGISTERED"
    assert handle_control_line(reg, "IVU_PING 52000", src, 3.0) == "ERR NOT_REGISTERED"


@pytest.mark.parametrize(
    "line",
    [
        "",
        "NONSENSE",
        "IVU_REGISTER",
        "IVU_REGISTER abc",
        "IVU_REGISTER 0",
        "IVU_REGISTER 70000",
        "IVU_REGISTER 52000 extra",
        "STATUS please",
        "ivu_register 52000",
    ],
)
def test_control_bad_requests(line):
    reg = IvuRegistry()
    assert handle_control_line(reg, line, ("h", 1), 0.0) == "ERR BAD_REQUEST"
    assert reg.count() == 0


def test_control_register_uses_source_host_and_given_port():
    reg = IvuRegistry()
    handle_control_line(reg, "IVU_REGISTER 52000", ("192.168.7.3", 12345), 0.0)
    assert reg.endpoints() == [("192.168.7.3", 52000)]


# -- live loopback -------------------------------------------------------------


def test_fresh_server_status():
    server = make_server()
    try:
        sock = udp_socket()
        assert control(server, sock, "STATUS") == "OK STATUS ivus=0 lines_in=0 lines_out=0"
        sock.close()
    finally:
        server.stop()


def test_fanout_delivers_in_order_byte_transparent():
    server = make_server()
    ivus = [udp_socket() for _ in range(3)]
    try:
        for sock in ivus:
            register(server, sock)
        sender = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        lines = [f"heartBeat 0x{i:02x} 0.5 0.5".encode() for i in range(5)]
        lines.append(b"addNeighbour 0x01 0x02")  # alias must NOT be normalized by the relay
        lines.append(b"totally bogus line")  # nor validated away
        for raw in lines:
            sender.sendto(raw + b"\n", ("127.0.0.1", server.data_port))
        for sock in ivus:
            got = recv_lines(sock, len(lines))
            assert got == [raw + b"\n" for raw in lines]
        sock0 = udp_socket(timeout=0.5)
        assert control(server, sock0, "STATUS") == (
            f"OK STATUS ivus=3 lines_in={len(lines)} lines_out={3 * len(lines)}"
        )
        sock0.close()
        sender.close()
    finally:
        for sock in ivus:
            sock.close()
        server.stop()


def test_unregistered_ivu_receives_nothing():
    server = make_server()
    a, b = udp_socket(timeout=0.4), udp_socket(timeout=0.4)
    try:
        register(server, a)
        register(server, b)
        sender = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sender.sendto(b"heartBeat 0x00\n", ("127.0.0.1", server.data_port))
        assert recv_lines(a, 1) == [b"heartBeat 0x00\n"]
        assert recv_lines(b, 1) == [b"heartBeat 0x00\n"]
        assert control(server, b, f"IVU_UNREGISTER {b.getsockname()[1]}") == "OK UNREGISTERED"
        for i in range(3):
            sender.sendto(f"heartBeat 0x0{i}\n".encode(), ("127.0.0.1", server.data_port))
        assert len(recv_lines(a, 3)) == 3
        assert recv_lines(b, 1) == []
        sender.close()
    finally:
        a.close()
        b.close()
        server.stop()


def test_multiple_lines_per_datagram_and_blank_skip():
    server = make_server()
    ivu = udp_socket()
    try:
        register(server, ivu)
        sender = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sender.sendto(b"heartBeat 0x00\n\nheartBeat 0x01\nheartBeat 0x02", ("127.0.0.1", server.data_port))
        got = recv_lines(ivu, 3)
        assert got == [b"heartBeat 0x00\n", b"heartBeat 0x01\n", b"heartBeat 0x02\n"]
        assert server.lines_in == 3
        sender.close()
    finally:
        ivu.close()
        server.stop()


def test_validate_mode_counts_but_still_forwards():
    server = make_server(validate=True)
    ivu = udp_socket()
    try:
        register(server, ivu)
        sender = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sender.sendto(b"not a command\nheartBeat 0x00\n", ("127.0.0.1", server.data_port))
        got = recv_lines(ivu, 2)
        assert got == [b"not a command\n", b"heartBeat 0x00\n"]
        assert server.parse_failures == 1
        sender.close()
    finally:
        ivu.close()
        server.stop()


def test_stream_source_with_carry():
    server = make_server()
    ivu = udp_socket()
    try:
        register(server, ivu)
        stream = io.BytesIO(b"heartBeat 0x00\nchange")
        server.ingest_stream(stream, "stdin")
        server.ingest_chunks([b"Color 0x00 255 0 0\n"], "stdin")
        # the partial tail of the first stream stays unflushed by design;
        # the second chunk arrives on a fresh carry, so only 2 full lines exist
        got = recv_lines(ivu, 2)
        assert got[0] == b"heartBeat 0x00\n"
        assert len(got) == 2
        assert server.sources["stdin"].lines_in == 2
    finally:
        ivu.close()
        server.stop()


def test_websocket_relay_delivers_frames():
    from websockets.sync.client import connect

    server = make_server(ws_port=0)
    try:
        with connect(f"ws://127.0.0.1:{server.ws_port}/stream") as ws:
            time.sleep(0.1)  # let the subscriber queue register
            sender = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sender.sendto(b"heartBeat 0x00 0.5 0.5\nsetText 0x00 hi\n", ("127.0.0.1", server.data_port))
            assert ws.recv(timeout=3) == "heartBeat 0x00 0.5 0.5"
            assert ws.recv(timeout=3) == "setText 0x00 hi"
            sender.close()
    finally:
        server.stop()


def test_websocket_wrong_path_rejected():
    from websockets.exceptions import InvalidStatus
    from websockets.sync.client import connect

    server = make_server(ws_port=0)
    try:
        with pytest.raises(InvalidStatus):
            connect(f"ws://127.0.0.1:{server.ws_port}/other")
    finally:
        server.stop()


def test_ttl_sweep_drops_silent_ivu():
    fake_now = [0.0]
    cfg = IcuConfig(data_port=0, control_port=0, host="127.0.0.1", ivu_ttl_secs=60.0)
    server = IcuServer(cfg, clock=lambda: fake_now[0])
    server.start()
    try:
        sock = udp_socket()
        register(server, sock)
        assert server.registry.count() == 1
        fake_now[0] = 61.0
        deadline = time.monotonic() + 3.0
        while server.registry.count() and time.monotonic() < deadline:
            time.sleep(0.05)
        assert server.registry.count() == 0
        sock.close()
    finally:
        server.stop()


def test_bind_error_when_port_taken():
    server = make_server()
    try:
        with pytest.raises(BindError):
            IcuServer(IcuConfig(data_port=server.data_port, control_port=0, host="127.0.0.1"))
    finally:
        server.stop()
