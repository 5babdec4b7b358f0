"""Vehicle-to-station transport: tiny binary pub/sub frames over TCP.

Wire layout, all lengths unsigned big-endian:

    magic 0x4D 0x4C | type 1B | topic_len 1B | topic | payload_len 2B | payload

The decoder is total: any byte stream yields a run of frames and error
markers, never an exception.  After corruption it rescans for the magic
pair and reports how many bytes were skipped.

The broker fans every PUBLISH out to matching subscribers with the same
trailing-'#' wildcard rule as the in-process bus, pings idle clients and
drops them after repeated silence.  The bridge pumps a bus against a
broker connection with exponential reconnect backoff, reporting link
state on `link/<id>/status` so the mission supervisor can react.
"""

from __future__ import annotations

import enum
import json
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

from .bus import MessageBus, topic_matches
from .errors import FrameTooLarge, TopicError

MAGIC = b"\x4d\x4c"
MAX_TOPIC_BYTES = 255  # one length byte on the wire
MAX_PAYLOAD_BYTES = 65535
DEFAULT_PORT = 1884


class FrameType(enum.IntEnum):
    CONNECT = 0x01
    CONNACK = 0x02
    PUBLISH = 0x03
    SUBSCRIBE = 0x08
    SUBACK = 0x09
    PING = 0x0C
    PONG = 0x0D
    DISCONNECT = 0x0E


_TOPICLESS = frozenset(
    {FrameType.CONNACK, FrameType.PING, FrameType.PONG, FrameType.DISCONNECT}
)
_TYPE_VALUES = frozenset(int(t) for t in FrameType)


@dataclass(frozen=True)
class Frame:
    type: FrameType
    topic: str = ""
    payload: bytes = b""

    def __post_init__(self):
        if self.type not in _TYPE_VALUES:
            raise ValueError(f"invalid frame type {self.type!r}")
        object.__setattr__(self, "type", FrameType(self.type))
        if self.type in _TOPICLESS and self.topic:
            raise ValueError(f"{self.type.name} frames carry no topic")


@dataclass(frozen=True)
class NeedMoreData:
    """Partial frame: feed more bytes and try again."""


@dataclass(frozen=True)
class BadMagic:
    """Corruption marker: skipped bytes while rescanning for the magic pair."""

    skipped: int


@dataclass(frozen=True)
class UnknownType:
    """Frame header carried an unassigned type byte."""

    type_byte: int


_NEED_MORE = NeedMoreData()
_HEADER = struct.Struct(">2sBB")
_PLEN = struct.Struct(">H")


def encode(frame: Frame) -> bytes:
    topic_b = frame.topic.encode("utf-8")
    if len(topic_b) > MAX_TOPIC_BYTES:
        raise FrameTooLarge(f"topic is {len(topic_b)} bytes, limit {MAX_TOPIC_BYTES}")
    if len(frame.payload) > MAX_PAYLOAD_BYTES:
        raise FrameTooLarge(
            f"payload is {len(frame.payload)} bytes, limit {MAX_PAYLOAD_BYTES}"
        )
    return (
        _HEADER.pack(MAGIC, int(frame.type), len(topic_b))
        + topic_b
        + _PLEN.pack(len(frame.payload))
        + frame.payload
    )


def decode(buf: bytes) -> tuple[Frame | NeedMoreData | BadMagic | UnknownType, bytes]:
    """Consume at most one frame or error marker from the head of buf.

    Returns (result, remaining).  NeedMoreData leaves the buffer intact.
    """
    i = buf.find(MAGIC)
    if i == -1:
        # a trailing first-magic-byte may be a frame boundary split
        rest = buf[-1:] if buf.endswith(MAGIC[:1]) else b""
        skipped = len(buf) - len(rest)
        if skipped:
            return BadMagic(skipped=skipped), rest
        return _NEED_MORE, buf
    if i > 0:
        return BadMagic(skipped=i), buf[i:]
    if len(buf) < 4:
        return _NEED_MORE, buf
    type_byte = buf[2]
    if type_byte not in _TYPE_VALUES:
        return UnknownType(type_byte=type_byte), buf[3:]
    topic_len = buf[3]
    if len(buf) < 4 + topic_len + 2:
        return _NEED_MORE, buf
    (payload_len,) = _PLEN.unpack_from(buf, 4 + topic_len)
    total = 4 + topic_len + 2 + payload_len
    if len(buf) < total:
        return _NEED_MORE, buf
    try:
        topic = buf[4 : 4 + topic_len].decode("utf-8")
        frame = Frame(
            type=FrameType(type_byte),
            topic=topic,
            payload=bytes(buf[4 + topic_len + 2 : total]),
        )
    except (UnicodeDecodeError, ValueError):
        # header lied (e.g. topic on a topicless type): resync past it
        return BadMagic(skipped=3), buf[3:]
    return frame, buf[total:]


class StreamDecoder:
    """Stateful wrapper feeding a byte stream through decode()."""

    def __init__(self):
        self._buf = b""

    def feed(self, data: bytes) -> list[Frame | BadMagic | UnknownType]:
        self._buf += data
        out: list[Frame | BadMagic | UnknownType] = []
        while True:
            result, self._buf = decode(self._buf)
            if isinstance(result, NeedMoreData):
                return out
            out.append(result)

    @property
    def pending(self) -> int:
        return len(self._buf)


def encode_document(doc: dict) -> bytes:
    """Canonical JSON serialization for telemetry payloads."""
    return json.dumps(doc, separators=(",", ":"), sort_keys=True).encode("utf-8")


def decode_document(payload: bytes) -> dict:
    doc = json.loads(payload.decode("utf-8"))
    if not isinstance(doc, dict):
        raise ValueError("telemetry document must be a JSON object")
    return doc


# -- broker ---------------------------------------------------------------


@dataclass
class _Conn:
    sock: socket.socket
    addr: tuple
    decoder: StreamDecoder = field(default_factory=StreamDecoder)
    subs: list[str] = field(default_factory=list)
    client_id: str = ""
    last_active: float = 0.0
    last_ping: float = 0.0
    pings_unanswered: int = 0
    wlock: threading.Lock = field(default_factory=threading.Lock)


class Broker:
    """Threaded TCP fan-out broker, one reader thread per connection."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        ping_interval: float = 10.0,
        max_missed_pongs: int = 3,
    ):
        self.host = host
        self.port = port
        self.ping_interval = ping_interval
        self.max_missed_pongs = max_missed_pongs
        self._listener: socket.socket | None = None
        self._conns: dict[int, _Conn] = {}
        self._lock = threading.Lock()
        self._running = False
        self._threads: list[threading.Thread] = []

    def start(self) -> "Broker":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.port))
        listener.listen(16)
        self.port = listener.getsockname()[1]
        self._listener = listener
        self._running = True
        for target in (self._accept_loop, self._ping_loop):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self) -> None:
        self._running = False
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            conns = list(self._conns.values())
        for conn in conns:
            self._drop(conn)
        for t in self._threads:
            t.join(timeout=2.0)
        self._threads.clear()

    def __enter__(self) -> "Broker":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def connection_count(self) -> int:
        with self._lock:
            return len(self._conns)

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while self._running:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Conn(sock=sock, addr=addr, last_active=time.monotonic())
            with self._lock:
                self._conns[id(conn)] = conn
            t = threading.Thread(target=self._read_loop, args=(conn,), daemon=True)
            t.start()

    def _read_loop(self, conn: _Conn) -> None:
        while self._running:
            try:
                data = conn.sock.recv(65536)
            except OSError:
                break
            if not data:
                break
            conn.last_active = time.monotonic()
            conn.pings_unanswered = 0
            for item in conn.decoder.feed(data):
                if isinstance(item, Frame):
                    try:
                        self._dispatch(conn, item)
                    except OSError:
                        break
        self._drop(conn)

    def _dispatch(self, conn: _Conn, frame: Frame) -> None:
        if frame.type is FrameType.CONNECT:
            conn.client_id = frame.topic
            self._send(conn, Frame(FrameType.CONNACK))
        elif frame.type is FrameType.SUBSCRIBE:
            if frame.topic:
                conn.subs.append(frame.topic)
            self._send(conn, Frame(FrameType.SUBACK, topic=frame.topic))
        elif frame.type is FrameType.PUBLISH:
            self._fan_out(frame)
        elif frame.type is FrameType.PING:
            self._send(conn, Frame(FrameType.PONG))
        elif frame.type is FrameType.PONG:
            conn.pings_unanswered = 0
        elif frame.type is FrameType.DISCONNECT:
            raise OSError("client disconnected")

    def _fan_out(self, frame: Frame) -> None:
        with self._lock:
            targets = [
                c
                for c in self._conns.values()
                if any(topic_matches(p, frame.topic) for p in c.subs)
            ]
        for conn in targets:
            try:
                self._send(conn, frame)
            except OSError:
                self._drop(conn)

    def _send(self, conn: _Conn, frame: Frame) -> None:
        data = encode(frame)
        with conn.wlock:
            conn.sock.sendall(data)

    def _drop(self, conn: _Conn) -> None:
        with self._lock:
            self._conns.pop(id(conn), None)
        try:
            conn.sock.close()
        except OSError:
            pass

    def _ping_loop(self) -> None:
        while self._running:
            time.sleep(min(0.05, self.ping_interval / 4.0))
            now = time.monotonic()
            with self._lock:
                conns = list(self._conns.values())
            for conn in conns:
                idle_since = max(conn.last_active, conn.last_ping)
                if now - idle_since < self.ping_interval:
                    continue
                if conn.pings_unanswered >= self.max_missed_pongs:
                    self._drop(conn)
                    continue
                try:
                    self._send(conn, Frame(FrameType.PING))
                except OSError:
                    self._drop(conn)
                    continue
                conn.last_ping = now
                conn.pings_unanswered += 1


# -- client ---------------------------------------------------------------


class LinkClient:
    """Blocking-connect, threaded-read protocol client.

    Incoming PUBLISH frames land in an internal queue consumed with
    poll(); PING frames are answered automatically.
    """

    def __init__(
        self, host: str, port: int, client_id: str = "", timeout: float = 5.0
    ):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock.settimeout(None)
        self._wlock = threading.Lock()
        self._inbox: queue.Queue[Frame] = queue.Queue()
        self._connack = threading.Event()
        self._suback = threading.Event()
        self._closed = threading.Event()
        self._ctl = threading.Lock()
        self._send(Frame(FrameType.CONNECT, topic=client_id))
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        if not self._connack.wait(timeout):
            self.close()
            raise ConnectionError("broker did not acknowledge the connection")

    @property
    def connected(self) -> bool:
        return not self._closed.is_set()

    def _send(self, frame: Frame) -> None:
        data = encode(frame)
        try:
            with self._wlock:
                self._sock.sendall(data)
        except OSError as exc:
            self._closed.set()
            raise ConnectionError("link send failed") from exc

    def _read_loop(self) -> None:
        dec = StreamDecoder()
        while not self._closed.is_set():
            try:
                data = self._sock.recv(65536)
            except OSError:
                break
            if not data:
                break
            for item in dec.feed(data):
                if not isinstance(item, Frame):
                    continue
                if item.type is FrameType.PUBLISH:
                    self._inbox.put(item)
                elif item.type is FrameType.CONNACK:
                    self._connack.set()
                elif item.type is FrameType.SUBACK:
                    self._suback.set()
                elif item.type is FrameType.PING:
                    try:
                        self._send(Frame(FrameType.PONG))
                    except ConnectionError:
                        break
        self._closed.set()

    def subscribe(self, pattern: str, timeout: float = 5.0) -> None:
        with self._ctl:
            self._suback.clear()
            self._send(Frame(FrameType.SUBSCRIBE, topic=pattern))
            if not self._suback.wait(timeout):
                raise ConnectionError("broker did not acknowledge the subscription")

    def publish(self, topic: str, payload: bytes) -> None:
        self._send(Frame(FrameType.PUBLISH, topic=topic, payload=payload))

    def poll(self, timeout: float = 0.0) -> Frame | None:
        try:
            if timeout > 0:
                return self._inbox.get(timeout=timeout)
            return self._inbox.get_nowait()
        except queue.Empty:
            return None

    def close(self) -> None:
        if not self._closed.is_set():
            try:
                self._send(Frame(FrameType.DISCONNECT))
            except ConnectionError:
                pass
        self._closed.set()
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


# -- bridge ---------------------------------------------------------------


class Bridge:
    """Pump-driven relay between an in-process bus and a broker.

    Call pump(now) from the owning loop; it attempts reconnects on a
    1 s doubling backoff capped at 60 s, forwards outbound bus traffic
    as JSON documents, injects inbound command topics onto the bus, and
    reports every connectivity change on link/<id>/status.
    """

    OUTBOUND = ("asv/#",)
    INBOUND = ("cmd/#",)

    def __init__(
        self,
        bus: MessageBus,
        vehicle_id: str,
        host: str,
        port: int,
        outbound: tuple[str, ...] = OUTBOUND,
        inbound: tuple[str, ...] = INBOUND,
        initial_backoff: float = 1.0,
        max_backoff: float = 60.0,
        connect_timeout: float = 0.5,
    ):
        self.bus = bus
        self.vehicle_id = vehicle_id
        self.host = host
        self.port = port
        self.inbound = inbound
        self.status_topic = f"link/{vehicle_id}/status"
        self._subs = [bus.subscribe(p) for p in outbound]
        self._initial_backoff = initial_backoff
        self._max_backoff = max_backoff
        self._connect_timeout = connect_timeout
        self._delay = initial_backoff
        self._next_attempt = 0.0
        self._sock: socket.socket | None = None
        self._decoder = StreamDecoder()
        self.connected = False
        self._status_published: bool | None = None
        self.dropped = 0

    def _publish_status(self, now: float) -> None:
        if self._status_published != self.connected:
            self.bus.publish(
                self.status_topic, {"t": now, "connected": self.connected}
            )
            self._status_published = self.connected

    def _attempt_connect(self, now: float) -> None:
        try:
            sock = socket.create_connection(
                (self.host, self.port), timeout=self._connect_timeout
            )
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            sock.settimeout(self._connect_timeout)
            sock.sendall(encode(Frame(FrameType.CONNECT, topic=self.vehicle_id)))
            dec = StreamDecoder()
            acked = False
            while not acked:
                data = sock.recv(4096)
                if not data:
                    raise OSError("closed during handshake")
                for item in dec.feed(data):
                    if isinstance(item, Frame) and item.type is FrameType.CONNACK:
                        acked = True
            for pattern in self.inbound:
                sock.sendall(encode(Frame(FrameType.SUBSCRIBE, topic=pattern)))
            sock.setblocking(False)
        except OSError:
            self._next_attempt = now + self._delay
            self._delay = min(self._delay * 2.0, self._max_backoff)
            self._publish_status(now)
            return
        self._sock = sock
        self._decoder = StreamDecoder()
        self.connected = True
        self._delay = self._initial_backoff
        self._publish_status(now)

    def _disconnect(self, now: float) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        self._sock = None
        self.connected = False
        self._next_attempt = now + self._delay
        self._delay = min(self._delay * 2.0, self._max_backoff)
        self._publish_status(now)

    def _pump_egress(self, now: float) -> None:
        assert self._sock is not None
        for sub in self._subs:
            for env in sub.drain():
                if not isinstance(env.payload, dict):
                    self.dropped += 1
                    continue
                try:
                    data = encode_document(env.payload)
                    frame = encode(Frame(FrameType.PUBLISH, env.topic, data))
                except (TypeError, ValueError, FrameTooLarge):
                    self.dropped += 1
                    continue
                try:
                    self._sock.sendall(frame)
                except BlockingIOError:
                    # kernel buffer full; drop rather than stall telemetry
                    self.dropped += 1
                except OSError:
                    self._disconnect(now)
                    return

    def _pump_ingress(self, now: float) -> None:
        assert self._sock is not None
        while True:
            try:
                data = self._sock.recv(65536)
            except (BlockingIOError, InterruptedError):
                return
            except OSError:
                self._disconnect(now)
                return
            if not data:
                self._disconnect(now)
                return
            for item in self._decoder.feed(data):
                if not isinstance(item, Frame):
                    continue
                if item.type is FrameType.PING:
                    try:
                        self._sock.sendall(encode(Frame(FrameType.PONG)))
                    except OSError:
                        self._disconnect(now)
                        return
                elif item.type is FrameType.PUBLISH:
                    self._deliver(item)

    def _deliver(self, frame: Frame) -> None:
        if not any(topic_matches(p, frame.topic) for p in self.inbound):
            return
        try:
            doc = decode_document(frame.payload)
        except (ValueError, UnicodeDecodeError):
            self.dropped += 1
            return
        try:
            self.bus.publish(frame.topic, doc)
        except TopicError:
            self.dropped += 1

    def pump(self, now: float) -> None:
        if not self.connected:
            if now >= self._next_attempt:
                self._attempt_connect(now)
            if not self.connected:
                return
        self._pump_egress(now)
        if self.connected:
            self._pump_ingress(now)

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        self._sock = None
        self.connected = False
