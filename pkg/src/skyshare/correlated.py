"""Offline dealer for the correlated randomness the online phase consumes.

Kinds: arithmetic multiplication triples (u, v, w = u*v), binary AND triples
(packed 64 lanes per word, w = u & v), and daBits (a random bit held both as
an XOR sharing and as an arithmetic sharing) used to hop a bit from the
binary domain into the arithmetic one.  The filtering sentinel is dealt once
per pool as an ordinary sharing of the public vmax constant, so the online
phase treats it like any other shared value.

The dealer is trusted in the semi-honest two-server model and is run by the
owner-side tooling.  Pools are either strict (pre-dealt to an exact budget,
exhaustion raises) or streaming (a seeded dealer extends both parties' pools
in lockstep on demand; both consumption orders are identical because the
online protocol is deterministic).

Pool file format (strict pools, one file per party):

    header '<5sBB'   magic b"SSKR1", l:u8, party:u8
    counts '<QQQ'    arith triples, binary triple words, daBits
    vmax sharing     one value, ceil(l/8) bytes little-endian
    arith block      u values, then v values, then w values
    binary block     u words, v words, w words (8-byte LE each, 64 lanes/word)
    daBit block      bits (one byte each), then arithmetic values

All streams are in consumption order.
"""

from __future__ import annotations

import struct
import threading
from collections import deque

import numpy as np

from .metering import RandomnessBudget
from .ring import Ring
from .sharing import decode_values, encode_values, value_width_bytes

POOL_MAGIC = b"SSKR1"
_POOL_HEADER = struct.Struct("<5sBB")
_POOL_COUNTS = struct.Struct("<QQQ")

STREAM_CHUNK = 1 << 16


class PoolExhausted(RuntimeError):
    """A gadget asked for more correlated randomness than was dealt."""


class StreamPool:
    """Chunked FIFO of parallel arrays; take() never reuses an element."""

    def __init__(self, parts: int, refill=None):
        self._parts = parts
        self._chunks: deque = deque()
        self._offset = 0  # consumed prefix of the head chunk
        self._available = 0
        self._refill = refill
        self._lock = threading.Lock()
        self.consumed = 0

    def push(self, chunk: tuple):
        if len(chunk) != self._parts:
            raise ValueError("chunk arity mismatch")
        with self._lock:
            self._chunks.append(chunk)
            self._available += len(chunk[0])

    def available(self) -> int:
        with self._lock:
            return self._available

    def take(self, count: int) -> tuple:
        if count < 0:
            raise ValueError("negative take")
        while True:
            with self._lock:
                if self._available >= count:
                    return self._take_locked(count)
            if self._refill is None:
                raise PoolExhausted(
                    f"pool exhausted: requested {count}, have {self._available}"
                )
            self._refill(self, count)

    def _take_locked(self, count: int) -> tuple:
        parts = [[] for _ in range(self._parts)]
        need = count
        while need:
            head = self._chunks[0]
            size = len(head[0]) - self._offset
            grab = min(size, need)
            for i in range(self._parts):
                parts[i].append(head[i][self._offset:self._offset + grab])
            need -= grab
            if grab == size:
                self._chunks.popleft()
                self._offset = 0
            else:
                self._offset += grab
        self._available -= count
        self.consumed += count
        if count and len(parts[0]) == 1:
            return tuple(p[0] for p in parts)
        return tuple(np.concatenate(p) if p else np.array([], dtype=np.uint64) for p in parts)


class Dealer:
    """Generates matching per-party randomness chunks from one seed."""

    def __init__(self, ring: Ring, seed):
        self.ring = ring
        self.rng = np.random.default_rng(seed)

    def _split(self, plain: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s1 = self.rng.integers(0, self.ring.modulus, size=plain.shape, dtype=np.uint64)
        return s1, self.ring.reduce(plain - s1)

    def arith_triples(self, count: int) -> tuple[tuple, tuple]:
        r = self.ring
        u = self.rng.integers(0, r.modulus, size=count, dtype=np.uint64)
        v = self.rng.integers(0, r.modulus, size=count, dtype=np.uint64)
        w = r.reduce(u * v)
        u1, u2 = self._split(u)
        v1, v2 = self._split(v)
        w1, w2 = self._split(w)
        return (u1, v1, w1), (u2, v2, w2)

    def bin_triple_words(self, nwords: int) -> tuple[tuple, tuple]:
        full = 1 << 64
        u = self.rng.integers(0, full, size=nwords, dtype=np.uint64)
        v = self.rng.integers(0, full, size=nwords, dtype=np.uint64)
        w = u & v
        u1 = self.rng.integers(0, full, size=nwords, dtype=np.uint64)
        v1 = self.rng.integers(0, full, size=nwords, dtype=np.uint64)
        w1 = self.rng.integers(0, full, size=nwords, dtype=np.uint64)
        return (u1, v1, w1), (u ^ u1, v ^ v1, w ^ w1)

    def dabits(self, count: int) -> tuple[tuple, tuple]:
        bits = self.rng.integers(0, 2, size=count, dtype=np.uint8)
        b1 = self.rng.integers(0, 2, size=count, dtype=np.uint8)
        a1, a2 = self._split(bits.astype(np.uint64))
        return (b1, a1), (bits ^ b1, a2)

    def value_sharing(self, value: int) -> tuple[int, int]:
        s1 = int(self.rng.integers(0, self.ring.modulus, dtype=np.uint64))
        return s1, self.ring.sub(value, s1)


class PartyRandomness:
    """One party's correlated-randomness hand for a session."""

    def __init__(self, arith: StreamPool, bin_words: StreamPool, dabits: StreamPool,
                 vmax: int, vmax_share: int):
        self.arith = arith
        self.bin = bin_words
        self.dabits = dabits
        self.vmax = vmax
        self.vmax_share = vmax_share


def deal_strict(ring: Ring, seed, budget: RandomnessBudget, vmax: int
                ) -> tuple[PartyRandomness, PartyRandomness]:
    """Pre-deal an exact budget; pools raise on exhaustion."""
    dealer = Dealer(ring, seed)
    at1, at2 = dealer.arith_triples(budget.arith_triples)
    bt1, bt2 = dealer.bin_triple_words(budget.bin_words)
    db1, db2 = dealer.dabits(budget.dabits)
    v1, v2 = dealer.value_sharing(vmax)
    out = []
    for triples, words, dabits, vshare in ((at1, bt1, db1, v1), (at2, bt2, db2, v2)):
        arith = StreamPool(3)
        arith.push(triples)
        binp = StreamPool(3)
        binp.push(words)
        dab = StreamPool(2)
        dab.push(dabits)
        out.append(PartyRandomness(arith, binp, dab, vmax, vshare))
    return out[0], out[1]


def deal_streaming(ring: Ring, seed, vmax: int, chunk: int = STREAM_CHUNK
                   ) -> tuple[PartyRandomness, PartyRandomness]:
    """Lazily dealt pools that never exhaust; both parties extend in lockstep."""
    dealer = Dealer(ring, seed)
    feeder_lock = threading.Lock()

    def paired(generator, pool_a, pool_b):
        def refill(pool, need):
            with feeder_lock:
                if pool.available() >= need:
                    return
                count = max(need - pool.available(), chunk)
                ca, cb = generator(count)
                pool_a.push(ca)
                pool_b.push(cb)
        return refill

    a_arith, b_arith = StreamPool(3), StreamPool(3)
    a_bin, b_bin = StreamPool(3), StreamPool(3)
    a_dab, b_dab = StreamPool(2), StreamPool(2)
    for pool_a, pool_b, gen in (
        (a_arith, b_arith, dealer.arith_triples),
        (a_bin, b_bin, dealer.bin_triple_words),
        (a_dab, b_dab, dealer.dabits),
    ):
        r = paired(gen, pool_a, pool_b)
        pool_a._refill = r
        pool_b._refill = r
    v1, v2 = dealer.value_sharing(vmax)
    return (
        PartyRandomness(a_arith, a_bin, a_dab, vmax, v1),
        PartyRandomness(b_arith, b_bin, b_dab, vmax, v2),
    )


def write_pool_file(path: str, party: int, l: int, rand: PartyRandomness,
                    budget: RandomnessBudget):
    """Serialize a strict pool (single un-consumed chunk per kind)."""
    u, v, w = rand.arith.take(budget.arith_triples)
    bu, bv, bw = rand.bin.take(budget.bin_words)
    bits, vals = rand.dabits.take(budget.dabits)
    with open(path, "wb") as f:
        f.write(_POOL_HEADER.pack(POOL_MAGIC, l, party))
        f.write(_POOL_COUNTS.pack(budget.arith_triples, budget.bin_words, budget.dabits))
        f.write(encode_values(np.array([rand.vmax_share], dtype=np.uint64), l))
        for part in (u, v, w):
            f.write(encode_values(part, l))
        for part in (bu, bv, bw):
            f.write(part.astype("<u8").tobytes())
        f.write(bits.tobytes())
        f.write(encode_values(vals, l))


def read_pool_file(path: str, vmax: int) -> tuple[PartyRandomness, dict]:
    with open(path, "rb") as f:
        head = f.read(_POOL_HEADER.size)
        if len(head) != _POOL_HEADER.size:
            raise ValueError(f"{path}: truncated pool header")
        magic, l, party = _POOL_HEADER.unpack(head)
        if magic != POOL_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        n_arith, n_binw, n_dab = _POOL_COUNTS.unpack(f.read(_POOL_COUNTS.size))
        width = value_width_bytes(l)
        vmax_share = int(decode_values(f.read(width), l)[0])
        arith_parts = [decode_values(f.read(width * n_arith), l) for _ in range(3)]
        bin_parts = [
            np.frombuffer(f.read(8 * n_binw), dtype="<u8").astype(np.uint64)
            for _ in range(3)
        ]
        bits = np.frombuffer(f.read(n_dab), dtype=np.uint8).copy()
        vals = decode_values(f.read(width * n_dab), l)
    for part, want in ((arith_parts[2], n_arith), (bin_parts[2], n_binw), (vals, n_dab)):
        if part.size != want:
            raise ValueError(f"{path}: truncated pool body")
    arith = StreamPool(3)
    arith.push(tuple(arith_parts))
    binp = StreamPool(3)
    binp.push(tuple(bin_parts))
    dab = StreamPool(2)
    dab.push((bits, vals))
    meta = {"l": l, "party": party, "arith": n_arith, "bin_words": n_binw, "dabits": n_dab}
    return PartyRandomness(arith, binp, dab, vmax, vmax_share), meta
