"""Role execution: the in-process two-party engine and the TCP server/client.

Both transports run the same protocol code; only the channel differs.  The
client talks to each server with query/result frames; the servers talk to
each other with round-data/open-bit frames plus one unmetered hello frame
that binds a peer connection to a session (metrics cover protocol flights
only, so in-process and TCP sessions report identical numbers).
"""

from __future__ import annotations

import socket
import struct
import threading
import time

import numpy as np

from .channel import (
    KIND_QUERY,
    KIND_RESULT,
    FrameError,
    LocalChannel,
    TcpChannel,
    read_frame,
    write_frame,
)
from .correlated import PartyRandomness, deal_streaming, deal_strict, read_pool_file
from .metering import MODE_DABIT, SessionMetrics, budget_for_query
from .online import Meters, PartyContext
from .protocol import check_domain, run_query
from .ring import Ring, default_vmax
from .sharing import decode_values, encode_values, read_share_file, share_matrix

PROTOCOL_VERSION = 1
_QUERY_HEAD = struct.Struct("<BBH")  # version, ring width, attribute count
_RESULT_HEAD = struct.Struct("<I")   # row count


def parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host, int(port)


def run_pair(task1, task2):
    """Run the two party closures in lockstep threads.

    Each task is (fn, channel); a failing party poisons its peer's channel
    so the survivor unblocks instead of waiting forever.
    """
    results = [None, None]
    errors: list[BaseException | None] = [None, None]

    def runner(i, fn, chan):
        try:
            results[i] = fn()
        except BaseException as exc:  # re-raised in the caller
            errors[i] = exc
            if chan is not None and hasattr(chan, "poison_peer"):
                chan.poison_peer()

    threads = [
        threading.Thread(target=runner, args=(i, fn, chan), daemon=True)
        for i, (fn, chan) in enumerate((task1, task2))
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for err in errors:
        if err is not None:
            raise err
    return results[0], results[1]


def meter_report(metrics: SessionMetrics) -> str:
    """Structured key = value report; refuses empty sessions."""
    if metrics.rounds <= 0:
        raise ValueError("session ran no protocol rounds; nothing to report")
    return metrics.report()


def _encode_query_payload(l: int, q_share: np.ndarray) -> bytes:
    return _QUERY_HEAD.pack(PROTOCOL_VERSION, l, q_share.size) + encode_values(q_share, l)


def _decode_query_payload(payload: bytes, l: int) -> np.ndarray:
    if len(payload) < _QUERY_HEAD.size:
        raise FrameError("query frame too short")
    ver, got_l, m = _QUERY_HEAD.unpack_from(payload)
    if ver != PROTOCOL_VERSION:
        raise FrameError(f"version mismatch: peer speaks {ver}, we speak {PROTOCOL_VERSION}")
    if got_l != l:
        raise FrameError(f"ring width mismatch: query uses l={got_l}, server uses l={l}")
    values = decode_values(payload[_QUERY_HEAD.size:], l)
    if values.size != m:
        raise FrameError(f"query declares {m} attributes but carries {values.size}")
    return values


def _encode_result(rows: np.ndarray, l: int) -> bytes:
    return _RESULT_HEAD.pack(rows.shape[0]) + encode_values(rows, l)


def _decode_result(payload: bytes, l: int, m: int) -> np.ndarray:
    if len(payload) < _RESULT_HEAD.size:
        raise FrameError("result frame too short")
    (k,) = _RESULT_HEAD.unpack_from(payload)
    values = decode_values(payload[_RESULT_HEAD.size:], l)
    if values.size != k * m:
        raise FrameError(f"result declares {k} rows but carries {values.size} values")
    return values.reshape(k, m)


class LocalEngine:
    """Owner, dealer, both servers and the client folded into one process.

    The code path above the channel layer is identical to the TCP one; it
    exists so tests, verification sweeps and benchmarks can run thousands
    of sessions without sockets.
    """

    def __init__(self, data, l: int = 64, seed: int = 0, latency_ms: float = 0.0,
                 mode: str = MODE_DABIT, bound: int | None = None,
                 vmax: int | None = None, scale: int = 1):
        self.ring = Ring(l)
        plain = np.asarray(data, dtype=np.int64)
        if plain.ndim != 2 or plain.shape[0] < 1:
            raise ValueError("database must be a non-empty n x m array")
        if (plain < 0).any():
            raise ValueError("attributes must be non-negative integers")
        self.n, self.m = plain.shape
        self.bound = int(plain.max()) if bound is None else int(bound)
        if plain.max(initial=0) > self.bound:
            raise ValueError("declared bound below actual data maximum")
        self.vmax = check_domain(self.n, self.m, self.bound, self.ring, vmax)
        self.mode = mode
        self.latency_s = latency_ms / 1000.0
        self.scale = scale
        self._seeds = np.random.SeedSequence(seed)
        owner_rng = np.random.default_rng(self._seeds.spawn(1)[0])
        self.p1_shares, self.p2_shares = share_matrix(plain, owner_rng, self.ring)
        self._sessions = 0
        self.last_contexts: tuple[PartyContext, PartyContext] | None = None

    def _next_session_seeds(self):
        self._sessions += 1
        return self._seeds.spawn(1)[0].spawn(4)

    def query(self, q, budget_kmax: int | None = None, keep_payloads: bool = False
              ) -> tuple[list[tuple[int, ...]], SessionMetrics]:
        """Run one full query session in-process; returns rows in fetch order."""
        q_arr = np.asarray(q, dtype=np.int64)
        if q_arr.shape != (self.m,):
            raise ValueError(f"query must have {self.m} attributes")
        if (q_arr < 0).any() or (q_arr > self.bound).any():
            raise ValueError(f"query attributes must lie in [0, {self.bound}]")
        dealer_seed, client_seed, rng1_seed, rng2_seed = self._next_session_seeds()
        if budget_kmax is None:
            rand1, rand2 = deal_streaming(self.ring, dealer_seed, self.vmax)
        else:
            budget = budget_for_query(self.n, self.m, self.ring.l, budget_kmax, self.mode)
            rand1, rand2 = deal_strict(self.ring, dealer_seed, budget, self.vmax)
        q1, q2 = share_matrix(q_arr[None, :], np.random.default_rng(client_seed), self.ring)
        session_id = self._sessions
        chan1, chan2 = LocalChannel.pair(session_id, self.latency_s, keep_payloads)
        ctx1 = PartyContext(1, self.ring, chan1, rand1, self.mode,
                            np.random.default_rng(rng1_seed))
        ctx2 = PartyContext(2, self.ring, chan2, rand2, self.mode,
                            np.random.default_rng(rng2_seed))
        started = time.perf_counter()
        out1, out2 = run_pair(
            (lambda: run_query(ctx1, self.p1_shares, q1[0]), chan1),
            (lambda: run_query(ctx2, self.p2_shares, q2[0]), chan2),
        )
        wall_ms = (time.perf_counter() - started) * 1000.0
        if out1.k != out2.k:
            raise FrameError("parties disagree on the result size")
        merged = self.ring.reduce(out1.rows + out2.rows)
        rows = [tuple(int(x) for x in row) for row in merged]
        self.last_contexts = (ctx1, ctx2)
        metrics = SessionMetrics(
            session=session_id, n=self.n, m=self.m, k=out1.k,
            rounds=chan1.rounds, bytes_tx=chan1.bytes_tx, bytes_rx=chan1.bytes_rx,
            secext=ctx1.meters.secext, wall_ms=wall_ms,
        )
        return rows, metrics


# --- TCP roles ---------------------------------------------------------------


class Server:
    """One cloud server: answers client query sessions against its share."""

    def __init__(self, party: int, listen: str, peer: str, shares: np.ndarray,
                 rand: PartyRandomness, l: int, latency_ms: float = 1.0,
                 mode: str = MODE_DABIT, seed: int = 0, handshake_timeout: float = 15.0):
        self.party = party
        self.listen_addr = parse_endpoint(listen)
        self.peer_addr = parse_endpoint(peer)
        self.shares = shares
        self.rand = rand
        self.ring = Ring(l)
        self.latency_s = latency_ms / 1000.0
        self.mode = mode
        self.rng = np.random.default_rng(seed)
        self.handshake_timeout = handshake_timeout
        self._stop = threading.Event()
        self._exec_lock = threading.Lock()
        self._threads: list[threading.Thread] = []
        self._client_sock: socket.socket | None = None
        self._peer_sock: socket.socket | None = None
        self._pending_peers: dict[int, socket.socket] = {}
        self._peer_ready = threading.Condition()
        self.completed: list[SessionMetrics] = []

    @classmethod
    def from_files(cls, party: int, listen: str, peer: str, share_path: str,
                   pool_path: str, latency_ms: float = 1.0, mode: str = MODE_DABIT,
                   vmax: int | None = None, seed: int = 0,
                   handshake_timeout: float = 15.0) -> "Server":
        shares, meta = read_share_file(share_path)
        if meta["party"] != party:
            raise ValueError(
                f"share file {share_path} belongs to party {meta['party']}, not {party}"
            )
        l = meta["l"]
        rand, pool_meta = read_pool_file(pool_path, default_vmax(l) if vmax is None else vmax)
        if pool_meta["party"] != party or pool_meta["l"] != l:
            raise ValueError(f"pool file {pool_path} does not match the share file")
        return cls(party, listen, peer, shares, rand, l, latency_ms, mode, seed,
                   handshake_timeout)

    @property
    def port(self) -> int:
        return self._client_sock.getsockname()[1]

    def start(self):
        self._client_sock = _listener(self.listen_addr)
        self._spawn(self._accept_clients)
        if self.party == 2:
            self._peer_sock = _listener(self.peer_addr)
            self._spawn(self._accept_peers)

    def stop(self):
        self._stop.set()
        for sock in (self._client_sock, self._peer_sock):
            if sock is not None:
                sock.close()
        for t in self._threads:
            t.join(timeout=5)

    def _spawn(self, fn, *args):
        t = threading.Thread(target=fn, args=args, daemon=True)
        t.start()
        self._threads.append(t)

    def _accept_clients(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._client_sock.accept()
            except OSError:
                return
            self._spawn(self._handle_client, conn)

    def _accept_peers(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._peer_sock.accept()
            except OSError:
                return
            self._spawn(self._register_peer, conn)

    def _register_peer(self, conn: socket.socket):
        try:
            kind, session, payload = read_frame(conn)
            if kind != KIND_QUERY or len(payload) < 3:
                raise FrameError("bad peer hello")
            ver, peer_l, peer_party = payload[0], payload[1], payload[2]
            if ver != PROTOCOL_VERSION:
                raise FrameError(f"version mismatch: peer hello v{ver}")
            if peer_l != self.ring.l or peer_party != 1:
                raise FrameError("peer hello does not match this server's session width")
        except (FrameError, OSError) as exc:
            print(f"server {self.party}: rejected peer link: {exc}", flush=True)
            conn.close()
            return
        with self._peer_ready:
            self._pending_peers[session] = conn
            self._peer_ready.notify_all()

    def _wait_peer(self, session: int, timeout: float = 30.0) -> socket.socket:
        deadline = time.monotonic() + timeout
        with self._peer_ready:
            while session not in self._pending_peers:
                remaining = deadline - time.monotonic()
                if remaining <= 0 or self._stop.is_set():
                    raise FrameError(f"peer link for session {session} never arrived")
                self._peer_ready.wait(remaining)
            return self._pending_peers.pop(session)

    def _dial_peer(self, session: int) -> socket.socket:
        """Open the per-session peer link and wait for the peer's commit.

        No correlated randomness is touched before the acknowledgement comes
        back, so a session the peer never joins (its client half went
        missing) aborts with both servers' pool cursors still aligned.
        """
        sock = socket.create_connection(self.peer_addr, timeout=self.handshake_timeout)
        sock.settimeout(self.handshake_timeout)
        hello = bytes([PROTOCOL_VERSION, self.ring.l, self.party])
        write_frame(sock, KIND_QUERY, session, hello)
        kind, got_session, payload = read_frame(sock)
        if kind != KIND_QUERY or got_session != session or len(payload) < 3:
            sock.close()
            raise FrameError("bad peer acknowledgement")
        if payload[0] != PROTOCOL_VERSION or payload[1] != self.ring.l or payload[2] != 2:
            sock.close()
            raise FrameError("version mismatch on the peer link")
        sock.settimeout(None)
        return sock

    def _run_session(self, peer_conn: socket.socket, session: int, q_share: np.ndarray):
        chan = TcpChannel(peer_conn, session, self.latency_s)
        started = time.perf_counter()
        try:
            ctx = PartyContext(self.party, self.ring, chan, self.rand,
                               self.mode, self.rng, Meters())
            outcome = run_query(ctx, self.shares, q_share)
        finally:
            chan.close()
        wall_ms = (time.perf_counter() - started) * 1000.0
        metrics = SessionMetrics(
            session=session, n=self.shares.shape[0], m=self.shares.shape[1],
            k=outcome.k, rounds=chan.rounds, bytes_tx=chan.bytes_tx,
            bytes_rx=chan.bytes_rx, secext=ctx.meters.secext, wall_ms=wall_ms,
        )
        return outcome, metrics

    def _handle_client(self, conn: socket.socket):
        session = -1
        try:
            kind, session, payload = read_frame(conn)
            if kind != KIND_QUERY:
                raise FrameError(f"expected a query frame, got kind {kind}")
            q_share = _decode_query_payload(payload, self.ring.l)
            if q_share.size != self.shares.shape[1]:
                raise FrameError(
                    f"query has {q_share.size} attributes, database has {self.shares.shape[1]}"
                )
            if self.party == 1:
                with self._exec_lock:
                    peer_conn = self._dial_peer(session)
                    outcome, metrics = self._run_session(peer_conn, session, q_share)
            else:
                peer_conn = self._wait_peer(session, timeout=self.handshake_timeout)
                with self._exec_lock:
                    ack = bytes([PROTOCOL_VERSION, self.ring.l, self.party])
                    write_frame(peer_conn, KIND_QUERY, session, ack)
                    outcome, metrics = self._run_session(peer_conn, session, q_share)
            self.completed.append(metrics)
            write_frame(conn, KIND_RESULT, session, _encode_result(outcome.rows, self.ring.l))
        except (FrameError, OSError, ValueError, RuntimeError) as exc:
            print(f"server {self.party}: session {session} aborted: {exc}", flush=True)
        finally:
            conn.close()


def _listener(addr: tuple[str, int]) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind(addr)
    sock.listen(16)
    return sock


def tcp_query(servers: list[str], q, l: int, seed: int = 0, scale: int = 1,
              timeout: float = 120.0) -> list[tuple[int, ...]]:
    """Client role: share the query, contact both servers, reconstruct."""
    if len(servers) != 2:
        raise ValueError("exactly two server endpoints are required")
    ring = Ring(l)
    q_arr = np.asarray(q, dtype=np.int64) * scale
    if (q_arr < 0).any():
        raise ValueError("query attributes must be non-negative")
    rng = np.random.default_rng(seed)
    session = int(rng.integers(0, 1 << 32))
    s1, s2 = share_matrix(q_arr[None, :], rng, ring)
    # connect to both before sending anything: no partial sessions
    socks = []
    try:
        for endpoint in servers:
            socks.append(socket.create_connection(parse_endpoint(endpoint), timeout=timeout))
        for sock, share in zip(socks, (s1, s2)):
            sock.settimeout(timeout)
            write_frame(sock, KIND_QUERY, session, _encode_query_payload(l, share[0]))
        results = []
        for sock in socks:
            kind, got_session, payload = read_frame(sock)
            if kind != KIND_RESULT or got_session != session:
                raise FrameError("unexpected frame while waiting for the result")
            results.append(payload)
    finally:
        for sock in socks:
            sock.close()
    m = q_arr.size
    rows1 = _decode_result(results[0], l, m)
    rows2 = _decode_result(results[1], l, m)
    if rows1.shape != rows2.shape:
        raise FrameError("servers disagree on the result size")
    merged = ring.reduce(rows1 + rows2)
    return [tuple(int(x) for x in row) for row in merged]
