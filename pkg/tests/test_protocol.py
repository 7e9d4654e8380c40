import numpy as np
import pytest

from conftest import reconstruct, reconstruct_bits, run_two, session_pair, share_pair

from skyshare.metering import msb_invocations, query_rounds
from skyshare.plaintext import brute_force_skyline, plaintext_skyline, same_rows
from skyshare.protocol import (
    attribute_sums,
    check_domain,
    fetch_min,
    filter_round,
    map_database,
)
from skyshare.ring import Ring, default_vmax
from skyshare.runtime import LocalEngine

R64 = Ring(64)


def _shared_instance(database, query, seed=50):
    p1, p2 = share_pair(np.asarray(database), R64, seed=seed)
    q1, q2 = share_pair(np.asarray(query)[None, :], R64, seed=seed + 1)
    return p1, p2, q1[0], q2[0]


def test_check_domain_guards():
    assert check_domain(10, 2, 100, R64) == default_vmax(64)
    with pytest.raises(ValueError):
        check_domain(10, 2, 2**61, R64)
    with pytest.raises(ValueError):
        check_domain(10, 2, 100, R64, vmax=1 << 63)


def test_map_database_walkthrough(table_example):
    database, query, mapped, _ = table_example
    p1, p2, q1, q2 = _shared_instance(database, query)
    ctx1, ctx2 = session_pair(seed=51)
    t1, t2 = run_two(ctx1, ctx2, lambda c: map_database(
        c, p1 if c.party == 1 else p2, q1 if c.party == 1 else q2))
    assert reconstruct(R64, t1, t2).tolist() == mapped.tolist()
    assert ctx1.meters.secext == database.size


def test_map_database_query_on_row_gives_zeros(table_example):
    database, _, _, _ = table_example
    p1, p2, q1, q2 = _shared_instance(database, database[2])
    ctx1, ctx2 = session_pair(seed=52)
    t1, t2 = run_two(ctx1, ctx2, lambda c: map_database(
        c, p1 if c.party == 1 else p2, q1 if c.party == 1 else q2))
    assert reconstruct(R64, t1, t2)[2].tolist() == [0, 0]


def test_map_database_random_vs_oracle():
    rng = np.random.default_rng(53)
    for trial in range(5):
        n, m = int(rng.integers(1, 30)), int(rng.integers(1, 5))
        database = rng.integers(0, 100, size=(n, m))
        query = rng.integers(0, 100, size=m)
        p1, p2, q1, q2 = _shared_instance(database, query, seed=60 + trial)
        ctx1, ctx2 = session_pair(seed=70 + trial)
        t1, t2 = run_two(ctx1, ctx2, lambda c: map_database(
            c, p1 if c.party == 1 else p2, q1 if c.party == 1 else q2))
        assert (reconstruct(R64, t1, t2) == np.abs(database - query)).all()


def test_map_database_dimension_mismatch(table_example):
    database, query, _, _ = table_example
    p1, p2, q1, q2 = _shared_instance(database, query)
    ctx1, _ = session_pair(seed=54)
    with pytest.raises(ValueError):
        map_database(ctx1, p1, q1[:1])


def test_attribute_sums(table_example):
    _, _, mapped, _ = table_example
    t1, t2 = share_pair(mapped, R64, seed=55)
    s = reconstruct(R64, attribute_sums(R64, t1), attribute_sums(R64, t2))
    assert s.tolist() == [3, 5, 5, 4]
    z1, z2 = share_pair(np.zeros((1, 4), dtype=np.int64), R64, seed=56)
    assert reconstruct(R64, attribute_sums(R64, z1), attribute_sums(R64, z2))[0] == 0
    one_col = np.array([[7], [3], [9]])
    c1, c2 = share_pair(one_col, R64, seed=57)
    got = reconstruct(R64, attribute_sums(R64, c1), attribute_sums(R64, c2))
    assert got.tolist() == [7, 3, 9]


def test_fetch_walkthrough_initial_and_filtered(table_example):
    database, _, mapped, _ = table_example
    t1, t2 = share_pair(mapped, R64, seed=58)
    p1, p2 = share_pair(database, R64, seed=59)

    s1, s2 = share_pair(mapped.sum(axis=1), R64, seed=60)
    ctx1, ctx2 = session_pair(seed=61)
    (a1, b1, c1), (a2, b2, c2) = run_two(ctx1, ctx2, lambda c: fetch_min(
        c, s1 if c.party == 1 else s2, t1 if c.party == 1 else t2,
        p1 if c.party == 1 else p2))
    assert int(reconstruct(R64, a1, a2)[0]) == 3
    assert reconstruct(R64, b1, b2).tolist() == [1, 2]
    assert reconstruct(R64, c1, c2).tolist() == [15, 102]

    # after the first filtering round the mutated sums point at row 4
    vmax = default_vmax(64)
    s1, s2 = share_pair(np.array([vmax, vmax, 5, 4], dtype=np.uint64), R64, seed=62)
    ctx1, ctx2 = session_pair(seed=63)
    (a1, b1, c1), (a2, b2, c2) = run_two(ctx1, ctx2, lambda c: fetch_min(
        c, s1 if c.party == 1 else s2, t1 if c.party == 1 else t2,
        p1 if c.party == 1 else p2))
    assert int(reconstruct(R64, a1, a2)[0]) == 4
    assert reconstruct(R64, c1, c2).tolist() == [19, 101]


def test_filter_round_walkthrough(table_example):
    """Both rounds of the walkthrough: the fetched row and the row it
    dominates get the sentinel, everything else survives verbatim."""
    _, _, mapped, _ = table_example
    vmax = default_vmax(64)
    t1, t2 = share_pair(mapped, R64, seed=64)

    s1, s2 = share_pair(mapped.sum(axis=1), R64, seed=65)
    st1, st2 = share_pair(mapped[0], R64, seed=66)   # fetched (1, 2), sum 3
    mn1, mn2 = share_pair(np.array([3]), R64, seed=67)
    ctx1, ctx2 = session_pair(seed=68)
    dbg = {1: {}, 2: {}}
    n1, n2 = run_two(ctx1, ctx2, lambda c: filter_round(
        c, t1 if c.party == 1 else t2, st1 if c.party == 1 else st2,
        (mn1 if c.party == 1 else mn2)[0:1], s1 if c.party == 1 else s2,
        debug_out=dbg[c.party]))
    assert reconstruct(R64, n1, n2).tolist() == [vmax, vmax, 5, 4]
    marked = reconstruct_bits(dbg[1]["marked"], dbg[2]["marked"])
    assert marked.tolist() == [1, 1, 0, 0]
    first = reconstruct_bits(dbg[1]["is_first"], dbg[2]["is_first"])
    assert first.sum() == 1 and first[0] == 1

    # round 2: fetched (3, 1) with sum 4 dominates (4, 1)
    s1, s2 = share_pair(np.array([vmax, vmax, 5, 4], dtype=np.uint64), R64, seed=69)
    st1, st2 = share_pair(mapped[3], R64, seed=70)
    mn1, mn2 = share_pair(np.array([4]), R64, seed=71)
    ctx1, ctx2 = session_pair(seed=72)
    dbg = {1: {}, 2: {}}
    n1, n2 = run_two(ctx1, ctx2, lambda c: filter_round(
        c, t1 if c.party == 1 else t2, st1 if c.party == 1 else st2,
        (mn1 if c.party == 1 else mn2)[0:1], s1 if c.party == 1 else s2,
        debug_out=dbg[c.party]))
    assert reconstruct(R64, n1, n2).tolist() == [vmax] * 4
    marked = reconstruct_bits(dbg[1]["marked"], dbg[2]["marked"])
    assert marked.tolist() == [0, 0, 1, 1]


def test_filter_marks_exactly_one_first_per_round():
    """Whatever the tie structure, exactly one row is taken as the round's
    winner and winners never double as dominated rows."""
    rng = np.random.default_rng(73)
    for trial in range(8):
        n, m = int(rng.integers(1, 20)), int(rng.integers(1, 4))
        mapped = rng.integers(0, 5, size=(n, m))  # dense ties
        sums = mapped.sum(axis=1)
        idx = int(np.argmin(sums))
        t1, t2 = share_pair(mapped, R64, seed=80 + trial)
        s1, s2 = share_pair(sums, R64, seed=90 + trial)
        st1, st2 = share_pair(mapped[idx], R64, seed=100 + trial)
        mn1, mn2 = share_pair(np.array([sums[idx]]), R64, seed=110 + trial)
        ctx1, ctx2 = session_pair(seed=120 + trial)
        dbg = {1: {}, 2: {}}
        run_two(ctx1, ctx2, lambda c: filter_round(
            c, t1 if c.party == 1 else t2, st1 if c.party == 1 else st2,
            (mn1 if c.party == 1 else mn2)[0:1], s1 if c.party == 1 else s2,
            debug_out=dbg[c.party]))
        first = reconstruct_bits(dbg[1]["is_first"], dbg[2]["is_first"])
        domi = reconstruct_bits(dbg[1]["is_dominated"], dbg[2]["is_dominated"])
        assert first.sum() == 1
        assert first[idx] == 1
        assert (first & domi).sum() == 0
        marked = reconstruct_bits(dbg[1]["marked"], dbg[2]["marked"])
        assert (marked == (first ^ domi)).all()


def test_run_query_walkthrough(table_example):
    database, query, _, skyline = table_example
    engine = LocalEngine(database, l=64, seed=7)
    rows, metrics = engine.query(query)
    assert rows == skyline  # fetch order preserved
    assert metrics.k == 2
    assert metrics.secext == msb_invocations(4, 2, 2) == 44
    assert metrics.rounds == query_rounds(4, 2, 64, 2)


def test_run_query_single_row_runs_two_loops():
    engine = LocalEngine([[5, 9]], l=64, seed=8)
    rows, metrics = engine.query([5, 8])
    assert rows == [(5, 9)]
    ctx1, _ = engine.last_contexts
    opened = [k for k, _, _ in ctx1.chan.transcript if k == 4]
    assert len(opened) == 2  # fetch round + stop round
    assert metrics.rounds == query_rounds(1, 2, 64, 1)


def test_run_query_duplicate_rows_all_returned():
    database = [[4, 4], [2, 9], [4, 4], [9, 1]]
    engine = LocalEngine(database, l=64, seed=9)
    rows, metrics = engine.query([4, 4])
    assert rows.count((4, 4)) == 2
    assert same_rows(rows, plaintext_skyline(database, [4, 4]))


def test_run_query_random_vs_brute_force():
    rng = np.random.default_rng(130)
    for trial in range(10):
        n = int(rng.integers(1, 201))
        m = int(rng.integers(1, 7))
        bound = int(rng.integers(1, 60))
        database = rng.integers(0, bound + 1, size=(n, m))
        query = rng.integers(0, bound + 1, size=m)
        engine = LocalEngine(database, l=64, seed=trial, bound=bound)
        rows, metrics = engine.query(query)
        assert same_rows(rows, brute_force_skyline(database, query)), trial
        assert metrics.secext == msb_invocations(n, m, metrics.k)


def test_sentinel_never_collides_and_filtered_rows_stay_filtered():
    """Stepwise debug run: live sums stay strictly below the sentinel and a
    fetched row is never one that an earlier round already marked."""
    rng = np.random.default_rng(140)
    database = rng.integers(0, 40, size=(12, 3))
    query = rng.integers(0, 40, size=3)
    vmax = default_vmax(64)

    mapped = np.abs(database.astype(np.int64) - query)
    p1, p2, q1, q2 = _shared_instance(database, query, seed=141)
    ctx1, ctx2 = session_pair(seed=142)

    t1, t2 = run_two(ctx1, ctx2, lambda c: map_database(
        c, p1 if c.party == 1 else p2, q1 if c.party == 1 else q2))
    s1, s2 = attribute_sums(R64, t1), attribute_sums(R64, t2)
    ever_marked = np.zeros(12, dtype=bool)
    for _ in range(13):
        sums = reconstruct(R64, s1, s2)
        live = sums < vmax
        assert (sums[live] < vmax).all()
        if not live.any():
            break
        fetched = int(np.argmin(np.where(live, sums, np.iinfo(np.int64).max)))
        assert not ever_marked[fetched]
        (mn1, ts1, _), (mn2, ts2, _) = run_two(ctx1, ctx2, lambda c: fetch_min(
            c, s1 if c.party == 1 else s2, t1 if c.party == 1 else t2,
            p1 if c.party == 1 else p2))
        dbg = {1: {}, 2: {}}
        new1, new2 = run_two(ctx1, ctx2, lambda c: filter_round(
            c, t1 if c.party == 1 else t2,
            ts1 if c.party == 1 else ts2,
            (mn1 if c.party == 1 else mn2), s1 if c.party == 1 else s2,
            debug_out=dbg[c.party]))
        marked_now = reconstruct_bits(dbg[1]["marked"], dbg[2]["marked"]).astype(bool)
        ever_marked |= marked_now
        s1, s2 = new1, new2
    assert ever_marked.all()


def test_run_query_rejects_empty_database():
    with pytest.raises(ValueError):
        LocalEngine(np.zeros((0, 2), dtype=np.int64), l=64, seed=1)
