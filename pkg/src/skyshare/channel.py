"""Ordered duplex channels between the two servers, with metering.

Wire frame (both transports carry identical bytes):

    4 bytes  big-endian length of the rest (kind + session + payload)
    1 byte   kind
    4 bytes  big-endian session id
    payload  little-endian value/bit streams, structured by the caller

One protocol round = both parties have sent and received one flight; the
round counter increments on every completed exchange.  Byte meters count
application payload only (frame headers excluded), per direction.  Injected
latency is applied on the receive side of each flight, so crossing flights
of one round overlap and the round floor is one one-way delay.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time

KIND_SHARE_UPLOAD = 1
KIND_QUERY = 2
KIND_ROUND_DATA = 3
KIND_OPEN_BIT = 4
KIND_RESULT = 5
KIND_NAMES = {
    KIND_SHARE_UPLOAD: "share-upload",
    KIND_QUERY: "query",
    KIND_ROUND_DATA: "round-data",
    KIND_OPEN_BIT: "open-bit",
    KIND_RESULT: "result",
}

_LEN = struct.Struct(">I")
_HEAD = struct.Struct(">BI")
MAX_FRAME = 1 << 30


class FrameError(ValueError):
    pass


def encode_frame(kind: int, session: int, payload: bytes) -> bytes:
    if kind not in KIND_NAMES:
        raise FrameError(f"unknown frame kind {kind}")
    body = _HEAD.pack(kind, session) + payload
    return _LEN.pack(len(body)) + body


def decode_frame(body: bytes) -> tuple[int, int, bytes]:
    """Decode the post-length portion of a frame."""
    if len(body) < _HEAD.size:
        raise FrameError("frame body shorter than its fixed header")
    kind, session = _HEAD.unpack_from(body)
    if kind not in KIND_NAMES:
        raise FrameError(f"unknown frame kind {kind}")
    return kind, session, body[_HEAD.size:]


def recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        piece = sock.recv(min(n - got, 1 << 20))
        if not piece:
            raise FrameError("connection closed mid-frame")
        chunks.append(piece)
        got += len(piece)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> tuple[int, int, bytes]:
    raw = recv_exact(sock, _LEN.size)
    (length,) = _LEN.unpack(raw)
    if length < _HEAD.size:
        raise FrameError(f"declared frame length {length} below minimum")
    if length > MAX_FRAME:
        raise FrameError(f"declared frame length {length} exceeds limit")
    return decode_frame(recv_exact(sock, length))


def write_frame(sock: socket.socket, kind: int, session: int, payload: bytes):
    sock.sendall(encode_frame(kind, session, payload))


class ChannelBase:
    """Common metering and validation; subclasses move the bytes."""

    def __init__(self, session: int, latency_s: float = 0.0, keep_payloads: bool = False):
        self.session = session
        self.latency_s = latency_s
        self.keep_payloads = keep_payloads
        self.rounds = 0
        self.bytes_tx = 0
        self.bytes_rx = 0
        self.transcript: list[tuple[int, int, int]] = []  # (kind, tx bytes, rx bytes)
        self.payload_log: list[tuple[int, bytes]] = []

    def _send_frame(self, frame: bytes):
        raise NotImplementedError

    def _recv_frame(self) -> bytes:
        raise NotImplementedError

    def exchange(self, payload: bytes, kind: int = KIND_ROUND_DATA) -> bytes:
        """Send one flight, receive the peer's, count one round."""
        self._send_frame(encode_frame(kind, self.session, payload))
        got_kind, got_session, got = decode_frame(self._recv_frame())
        if got_session != self.session:
            raise FrameError(f"session mismatch: {got_session} != {self.session}")
        if got_kind != kind:
            raise FrameError(
                f"round desync: expected {KIND_NAMES[kind]}, got {KIND_NAMES[got_kind]}"
            )
        self.rounds += 1
        self.bytes_tx += len(payload)
        self.bytes_rx += len(got)
        self.transcript.append((kind, len(payload), len(got)))
        if self.keep_payloads:
            self.payload_log.append((kind, got))
        return got

    def close(self):
        pass


class LocalChannel(ChannelBase):
    """In-process transport over a pair of queues; frames are real bytes so
    the framing layer is exercised identically to TCP."""

    def __init__(self, outbox, inbox, session, latency_s=0.0, keep_payloads=False):
        super().__init__(session, latency_s, keep_payloads)
        self._outbox = outbox
        self._inbox = inbox

    @classmethod
    def pair(cls, session: int = 0, latency_s: float = 0.0, keep_payloads: bool = False):
        q12: queue.Queue = queue.Queue()
        q21: queue.Queue = queue.Queue()
        return (
            cls(q12, q21, session, latency_s, keep_payloads),
            cls(q21, q12, session, latency_s, keep_payloads),
        )

    def _send_frame(self, frame: bytes):
        self._outbox.put((time.monotonic() + self.latency_s, frame))

    def poison_peer(self):
        """Unblock a peer whose counterpart died mid-protocol."""
        self._outbox.put((0.0, None))

    def _recv_frame(self) -> bytes:
        deliver_at, frame = self._inbox.get()
        if frame is None:
            raise FrameError("peer aborted the session")
        wait = deliver_at - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        (length,) = _LEN.unpack_from(frame)
        return frame[_LEN.size:_LEN.size + length]


class TcpChannel(ChannelBase):
    """Socket transport with a writer thread so simultaneous large flights
    from both parties cannot deadlock on full send buffers."""

    def __init__(self, sock: socket.socket, session, latency_s=0.0, keep_payloads=False):
        super().__init__(session, latency_s, keep_payloads)
        self._sock = sock
        self._outq: queue.Queue = queue.Queue()
        self._writer_err = None
        self._writer = threading.Thread(target=self._write_loop, daemon=True)
        self._writer.start()

    def _write_loop(self):
        while True:
            frame = self._outq.get()
            if frame is None:
                return
            try:
                self._sock.sendall(frame)
            except OSError as exc:  # surfaced on the next exchange
                self._writer_err = exc
                return

    def _send_frame(self, frame: bytes):
        if self._writer_err is not None:
            raise FrameError(f"peer link write failed: {self._writer_err}")
        self._outq.put(frame)

    def _recv_frame(self) -> bytes:
        raw = recv_exact(self._sock, _LEN.size)
        (length,) = _LEN.unpack(raw)
        if length < _HEAD.size or length > MAX_FRAME:
            raise FrameError(f"bad frame length {length}")
        body = recv_exact(self._sock, length)
        if self.latency_s > 0:
            time.sleep(self.latency_s)
        return body

    def close(self):
        self._outq.put(None)
        self._writer.join(timeout=5)
        try:
            self._sock.close()
        except OSError:
            pass
