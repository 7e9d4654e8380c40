"""Shared two-party test harness."""

import numpy as np
import pytest

from skyshare.channel import LocalChannel
from skyshare.correlated import deal_streaming, deal_strict
from skyshare.metering import MODE_DABIT
from skyshare.online import PartyContext
from skyshare.ring import Ring, default_vmax
from skyshare.runtime import run_pair
from skyshare.sharing import share_matrix


def session_pair(l=64, seed=0, mode=MODE_DABIT, budget=None, vmax=None,
                 latency_s=0.0, keep_payloads=False):
    """Build linked party contexts with streaming (or strict) randomness."""
    ring = Ring(l)
    vmax = default_vmax(l) if vmax is None else vmax
    seeds = np.random.SeedSequence(seed).spawn(3)
    if budget is None:
        r1, r2 = deal_streaming(ring, seeds[0], vmax)
    else:
        r1, r2 = deal_strict(ring, seeds[0], budget, vmax)
    c1, c2 = LocalChannel.pair(0, latency_s, keep_payloads)
    ctx1 = PartyContext(1, ring, c1, r1, mode, np.random.default_rng(seeds[1]))
    ctx2 = PartyContext(2, ring, c2, r2, mode, np.random.default_rng(seeds[2]))
    return ctx1, ctx2


def run_two(ctx1, ctx2, fn):
    """Run fn(ctx) for both parties in lockstep; returns both results."""
    return run_pair((lambda: fn(ctx1), ctx1.chan), (lambda: fn(ctx2), ctx2.chan))


def share_pair(values, ring, seed=1234):
    return share_matrix(np.asarray(values), np.random.default_rng(seed), ring)


def reconstruct(ring, a, b):
    return ring.reduce(np.asarray(a, dtype=np.uint64) + np.asarray(b, dtype=np.uint64))


def reconstruct_bits(a, b):
    return np.asarray(a, dtype=np.uint8) ^ np.asarray(b, dtype=np.uint8)


@pytest.fixture
def table_example():
    """The four-row two-attribute walkthrough instance."""
    database = np.array([[15, 102], [14, 97], [20, 99], [19, 101]])
    query = np.array([16, 100])
    mapped = np.array([[1, 2], [2, 3], [4, 1], [3, 1]])
    skyline = [(15, 102), (19, 101)]
    return database, query, mapped, skyline
