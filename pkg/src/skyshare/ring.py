"""Fixed-width ring arithmetic mod 2**l with two's-complement signed reading.

Every value that flows through the sharing layer and the online protocol is
an element of Z_{2^l}.  The width l is a session-wide constant: 64 for
production sessions, 8 (or 4) for exhaustive-domain tests.  Vectorized code
keeps values in numpy uint64 arrays and masks after each operation; for
l = 64 the mask is a no-op and uint64 hardware wraparound does the work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_WIDTH = 64


@dataclass(frozen=True)
class Ring:
    """Arithmetic context for Z_{2^l}."""

    l: int

    def __post_init__(self):
        if not 2 <= self.l <= MAX_WIDTH:
            raise ValueError(f"ring width must be in [2, {MAX_WIDTH}], got {self.l}")

    @property
    def modulus(self) -> int:
        return 1 << self.l

    @property
    def mask(self) -> int:
        return (1 << self.l) - 1

    @property
    def half(self) -> int:
        # First value interpreted as negative.
        return 1 << (self.l - 1)

    @property
    def mask_np(self) -> np.uint64:
        return np.uint64(self.mask)

    def reduce(self, arr: np.ndarray) -> np.ndarray:
        """Mask a uint64 array back into the ring."""
        if self.l == MAX_WIDTH:
            return arr
        return arr & self.mask_np

    def add(self, a: int, b: int) -> int:
        return (a + b) & self.mask

    def sub(self, a: int, b: int) -> int:
        return (a - b) & self.mask

    def mul(self, a: int, b: int) -> int:
        return (a * b) & self.mask

    def neg(self, a: int) -> int:
        return (-a) & self.mask

    def msb(self, a: int) -> int:
        """Bit l-1 of a: 1 iff the signed reading of a is negative."""
        return (a >> (self.l - 1)) & 1

    def encode_signed(self, v: int) -> int:
        """Two's-complement encoding of a bounded signed integer."""
        if not -self.half < v < self.half:
            raise ValueError(f"{v} out of signed range for width {self.l}")
        return v & self.mask

    def decode_signed(self, a: int) -> int:
        if not 0 <= a < self.modulus:
            raise ValueError(f"{a} is not a ring element at width {self.l}")
        return a - self.modulus if a >= self.half else a

    def to_array(self, values) -> np.ndarray:
        """Copy python ints / sequences into a masked uint64 array."""
        arr = np.asarray(values, dtype=np.uint64)
        return self.reduce(arr.copy() if arr is values else arr)

    def msb_array(self, arr: np.ndarray) -> np.ndarray:
        return ((arr >> np.uint64(self.l - 1)) & np.uint64(1)).astype(np.uint8)


def default_vmax(l: int) -> int:
    """Filtering sentinel: strictly above any admissible attribute sum.

    2^(l-2) keeps both compared operands and their difference inside the
    signed-comparison validity window (-2^(l-1), 2^(l-1)).
    """
    return 1 << (l - 2)
