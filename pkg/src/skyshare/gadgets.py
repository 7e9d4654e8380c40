"""Comparison and oblivious-minimum gadgets built on the online primitives.

less_than computes XOR shares of msb(a - b) for a batch of shared pairs.
Each party bit-decomposes its local share of d = a - b; the two bit columns
feed the log-depth carry circuit as binary sharings (party 1 holds the
first addend's bits, party 2 the second's).  The output bit equals
(a < b) under the signed reading whenever a, b and a - b stay inside
(-2^(l-1), 2^(l-1)), which the protocol layer guarantees via its
domain-bound checks; the raw msb identity holds on the full ring.
"""

from __future__ import annotations

import numpy as np

from .bitpack import bits_of_values, unpack_bits
from .online import PartyContext, and_packed, obliv_select
from .ppa import carry_plan


def less_than(ctx: PartyContext, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """XOR shares of msb(a-b) per element; one batched carry circuit."""
    if a.shape != b.shape:
        raise ValueError("comparison operand shape mismatch")
    r = ctx.ring
    n = a.size
    d = r.reduce(a.ravel() - b.ravel())
    lanes = bits_of_values(d, r.l)  # (l, words) packed over the batch
    mine = lanes[:r.l - 1]
    zeros = np.zeros_like(mine)
    # adder inputs: a-bits live at party 1, b-bits at party 2
    if ctx.is_p1:
        g = and_packed(ctx, mine, zeros)
    else:
        g = and_packed(ctx, zeros, mine)
    p = mine  # share of a_i XOR b_i is each party's own bit column

    plan = carry_plan(r.l)
    for level in range(plan.combine_levels):
        pairs = plan.level_pairs[level]
        root = level == plan.combine_levels - 1
        lo_g, hi_g = g[0:2 * pairs:2], g[1:2 * pairs:2]
        lo_p, hi_p = p[0:2 * pairs:2], p[1:2 * pairs:2]
        if root:
            z = and_packed(ctx, hi_p, lo_g)
            g = hi_g ^ z
            p = hi_p  # unused past the root
        else:
            z = and_packed(ctx, np.concatenate([hi_p, hi_p]), np.concatenate([lo_g, lo_p]))
            g = np.concatenate([hi_g ^ z[:pairs], g[2 * pairs:]])
            p = np.concatenate([z[pairs:], p[2 * pairs:]])
    carry = g[0]

    out = lanes[r.l - 1] ^ carry
    ctx.meters.secext += n
    return unpack_bits(out, n).reshape(a.shape)


def min_with_payload(ctx: PartyContext, keys: np.ndarray, payloads: list[np.ndarray]
                     ) -> tuple[np.ndarray, list[np.ndarray]]:
    """Tournament minimum over shared keys, carrying payload rows along.

    Swap strictly on right < left at every level, so among equal keys the
    lowest index survives - the same winner a sequential first-minimum scan
    would keep.  ceil(log2(n)) comparison levels, each one batched flight.
    """
    n = keys.shape[0]
    if n < 1:
        raise ValueError("minimum of an empty vector")
    widths = [p.shape[1] for p in payloads]
    for p in payloads:
        if p.shape[0] != n:
            raise ValueError("payload row count mismatch")
    rows = np.hstack([keys[:, None]] + payloads) if payloads else keys[:, None]
    while rows.shape[0] > 1:
        cnt = rows.shape[0]
        pairs = cnt // 2
        left = rows[0:2 * pairs:2]
        right = rows[1:2 * pairs:2]
        phi = less_than(ctx, right[:, 0], left[:, 0])
        winners = obliv_select(ctx, phi, right, left)
        rows = np.concatenate([winners, rows[2 * pairs:]])
    best = rows[0]
    out, at = [], 1
    for w in widths:
        out.append(best[at:at + w])
        at += w
    return best[0:1], out
