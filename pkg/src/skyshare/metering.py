"""Closed-form cost model: comparison counts, round counts, session metrics.

The protocol's cost is dominated by secure MSB extractions (one per compared
pair).  The exact total for a query over n tuples of m attributes returning
k rows is

    n*m  (mapping)  +  (k+1)*n  (fetch tree n-1 + stop test 1, per loop)
                    +  k*n*(m+1)  (filter comparisons per completed loop)
    = n*m + k*n*(2+m) + n

The round forms below are the registry the runtime's meters are checked
against: the implementation must hit them exactly, so every structural
choice (batched comparison levels, merged flag circuits, two-flight
bit-by-value multiplication) is encoded here and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bitpack import words_for
from .ppa import carry_plan, ceil_log2, msb_rounds

MODE_DABIT = "dabit"
MODE_MESSAGES = "messages"

METRICS_CSV_HEADER = "session,n,m,k,rounds,bytes_tx,bytes_rx,secext,wall_ms"


def cl2(n: int) -> int:
    """ceil(log2(n)) with cl2(1) = 0."""
    return ceil_log2(n)


def msb_invocations(n: int, m: int, k: int) -> int:
    """Exact secure-comparison count for a completed query returning k rows."""
    return n * m + k * n * (2 + m) + n


def pair_levels(n: int) -> list[int]:
    """Pair counts per level of a halving tournament over n entries."""
    out = []
    while n > 1:
        out.append(n // 2)
        n = n // 2 + n % 2
    return out


def select_rounds(mode: str) -> int:
    # dabit route: one bit-opening flight, one triple flight.
    # message-pair route: a single crossing flight.
    return 2 if mode == MODE_DABIT else 1


def map_rounds(l: int, mode: str = MODE_DABIT) -> int:
    return msb_rounds(l) + select_rounds(mode)


def fetch_rounds(n: int, l: int, mode: str = MODE_DABIT) -> int:
    return cl2(n) * (msb_rounds(l) + select_rounds(mode))


def stop_rounds(l: int) -> int:
    return msb_rounds(l) + 1


def filt_rounds(n: int, m: int, l: int, mode: str = MODE_DABIT) -> int:
    # one fused comparison batch, the first-marker scan running level-locked
    # with the per-tuple AND tree, one finishing AND flight, one overwrite.
    flag_levels = max(cl2(n), cl2(m))
    return msb_rounds(l) + flag_levels + 1 + select_rounds(mode)


def query_rounds(n: int, m: int, l: int, k: int, mode: str = MODE_DABIT) -> int:
    per_loop = fetch_rounds(n, l, mode) + stop_rounds(l)
    return map_rounds(l, mode) + (k + 1) * per_loop + k * filt_rounds(n, m, l, mode)


# --- correlated-randomness accounting ---------------------------------------


@dataclass
class RandomnessBudget:
    """Per-kind correlated randomness needed by one query session."""

    secext: int = 0
    arith_triples: int = 0
    bin_words: int = 0
    dabits: int = 0

    def __add__(self, other: "RandomnessBudget") -> "RandomnessBudget":
        return RandomnessBudget(
            self.secext + other.secext,
            self.arith_triples + other.arith_triples,
            self.bin_words + other.bin_words,
            self.dabits + other.dabits,
        )

    def scaled(self, times: int) -> "RandomnessBudget":
        return RandomnessBudget(
            self.secext * times,
            self.arith_triples * times,
            self.bin_words * times,
            self.dabits * times,
        )


def msb_cost(batch: int, l: int) -> RandomnessBudget:
    """Binary-triple words consumed by one batched comparison of `batch` pairs."""
    return RandomnessBudget(
        secext=batch, bin_words=carry_plan(l).total_and_rows * words_for(batch)
    )


def select_cost(batch: int, width: int, mode: str) -> RandomnessBudget:
    """Oblivious two-way select of `batch` rows, `width` values per row."""
    if mode == MODE_MESSAGES:
        return RandomnessBudget()
    return RandomnessBudget(arith_triples=2 * batch * width, dabits=2 * batch)


def map_cost(n: int, m: int, l: int, mode: str) -> RandomnessBudget:
    return msb_cost(n * m, l) + select_cost(n * m, 1, mode)


def fetch_cost(n: int, m: int, l: int, mode: str) -> RandomnessBudget:
    total = RandomnessBudget()
    for pairs in pair_levels(n):
        total = total + msb_cost(pairs, l) + select_cost(pairs, 1 + 2 * m, mode)
    return total


def stop_cost(l: int) -> RandomnessBudget:
    return msb_cost(1, l)


def filt_cost(n: int, m: int, l: int, mode: str) -> RandomnessBudget:
    total = msb_cost(n * (m + 1), l)
    extra_words = 0
    # exclusive prefix-AND over the equal-minimum markers
    for d in range(cl2(n)):
        extra_words += words_for(n - (1 << d))
    # per-tuple AND tree over m complemented comparison columns
    width = m
    while width > 1:
        pairs = width // 2
        extra_words += words_for(n * pairs)
        width = pairs + width % 2
    # finishing flight: first-marker AND dominated-marker
    extra_words += words_for(2 * n)
    total.bin_words += extra_words
    return total + select_cost(n, 1, mode)


def budget_for_query(n: int, m: int, l: int, k_max: int, mode: str = MODE_DABIT) -> RandomnessBudget:
    """Randomness to deal so a query returning up to k_max rows cannot starve."""
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    if k_max < 1:
        raise ValueError("k_max must be at least 1: every query runs a fetch round")
    per_loop = fetch_cost(n, m, l, mode) + stop_cost(l)
    total = map_cost(n, m, l, mode) + per_loop.scaled(k_max + 1) + filt_cost(n, m, l, mode).scaled(k_max)
    assert total.secext == msb_invocations(n, m, k_max)
    return total


# --- session metrics ---------------------------------------------------------


@dataclass
class SessionMetrics:
    session: int
    n: int
    m: int
    k: int
    rounds: int
    bytes_tx: int
    bytes_rx: int
    secext: int
    wall_ms: float

    def report(self) -> str:
        lines = [f"{name} = {getattr(self, name)}" for name in (
            "session", "n", "m", "k", "rounds", "bytes_tx", "bytes_rx", "secext")]
        lines.append(f"wall_ms = {self.wall_ms:.3f}")
        return "\n".join(lines)

    def csv_row(self) -> str:
        return (
            f"{self.session},{self.n},{self.m},{self.k},{self.rounds},"
            f"{self.bytes_tx},{self.bytes_rx},{self.secext},{self.wall_ms:.3f}"
        )
