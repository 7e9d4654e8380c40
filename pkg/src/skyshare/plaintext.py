"""Cleartext skyline engines: the iterative reference and a brute-force oracle.

The reference engine mirrors the cleartext procedure the secure protocol
emulates: map every row to its per-attribute distance from the query,
repeatedly pull the first row with the minimum distance sum, then drop it
and everything it dominates.  The brute-force oracle instead applies the
dominance definition pairwise.  Their agreement (as multisets of rows) is
established by test before either is trusted as an oracle.
"""

from __future__ import annotations

from collections import Counter

import numpy as np


def dominates(a, b) -> bool:
    """True iff a is at least as close in every attribute and strictly
    closer in at least one (already-mapped coordinates)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("tuples must share a dimension")
    return bool(np.all(a <= b) and np.any(a < b))


def mapped_rows(database: np.ndarray, query: np.ndarray) -> np.ndarray:
    db = np.asarray(database, dtype=np.int64)
    q = np.asarray(query, dtype=np.int64)
    if db.ndim != 2 or q.shape != (db.shape[1],):
        raise ValueError("database must be n x m with an m-attribute query")
    return np.abs(db - q)


def plaintext_skyline(database: np.ndarray, query: np.ndarray) -> list[tuple[int, ...]]:
    """Fetch-ordered skyline rows of `database` with respect to `query`."""
    db = np.asarray(database, dtype=np.int64)
    if db.shape[0] < 1:
        raise ValueError("empty database")
    mapped = mapped_rows(db, query)
    sums = mapped.sum(axis=1)
    alive = np.ones(db.shape[0], dtype=bool)
    out: list[tuple[int, ...]] = []
    while alive.any():
        masked = np.where(alive, sums, np.iinfo(np.int64).max)
        idx = int(np.argmin(masked))  # argmin keeps the first minimum
        star = mapped[idx]
        out.append(tuple(int(x) for x in db[idx]))
        dominated = alive & np.all(star <= mapped, axis=1) & np.any(star < mapped, axis=1)
        alive[dominated] = False
        alive[idx] = False
    return out


def brute_force_skyline(database: np.ndarray, query: np.ndarray) -> list[tuple[int, ...]]:
    """Rows not dominated by any other row in the mapped space, O(n^2 m)."""
    db = np.asarray(database, dtype=np.int64)
    if db.shape[0] < 1:
        raise ValueError("empty database")
    mapped = mapped_rows(db, query)
    le = np.all(mapped[:, None, :] <= mapped[None, :, :], axis=2)
    lt = np.any(mapped[:, None, :] < mapped[None, :, :], axis=2)
    dominated_by = le & lt  # [j, i] True: row j dominates row i
    beaten = dominated_by.any(axis=0)
    return [tuple(int(x) for x in db[i]) for i in np.flatnonzero(~beaten)]


def same_rows(a, b) -> bool:
    """Multiset equality of row collections."""
    return Counter(tuple(int(x) for x in row) for row in a) == Counter(
        tuple(int(x) for x in row) for row in b
    )
