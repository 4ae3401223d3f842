"""Bit interleavers for header and payload coded streams.

The header uses a fixed 80-entry permutation.  The payload uses a block
interleaver addressed with a stride of 48: the deinterleaver reads memory
at addresses 0, 48, 96, ... wrapping to 1, 49, ... so that consecutive
coded bits land in different 48-bit hopping blocks.
"""

from __future__ import annotations

import numpy as np

from .config import HEADER_CODED_BITS, PAYLOAD_BLOCK_BITS

# Deinterleaving read order (0-based): deinterleaved[i] = received[HEADER_PERM[i]]
HEADER_PERM = np.array(
    [x - 1 for x in (
        1, 18, 26, 34, 42, 50, 58, 66, 73,
        2, 10, 27, 35, 43, 51, 59, 67, 74,
        3, 11, 19, 36, 44, 52, 60, 68, 75,
        4, 12, 20, 28, 45, 53, 61, 69, 76,
        5, 13, 21, 29, 37, 54, 62, 70, 77,
        6, 14, 22, 30, 38, 46, 63, 71, 78,
        7, 15, 23, 31, 39, 47, 55, 72, 79,
        8, 16, 24, 32, 40, 48, 56, 64, 80,
        9, 17, 25, 33, 41, 49, 57, 65,
    )],
    dtype=np.int64,
)

_HEADER_PERM_INV = np.empty_like(HEADER_PERM)
_HEADER_PERM_INV[HEADER_PERM] = np.arange(HEADER_CODED_BITS)


def interleave_header(bits) -> np.ndarray:
    """Transmit-side permutation of the 80 coded header bits."""
    bits = np.asarray(bits)
    if bits.shape != (HEADER_CODED_BITS,):
        raise ValueError("header interleaver expects exactly 80 bits")
    return bits[_HEADER_PERM_INV]


def deinterleave_header(values) -> np.ndarray:
    """Receive-side inverse permutation (works on hard or soft values)."""
    values = np.asarray(values)
    if values.shape != (HEADER_CODED_BITS,):
        raise ValueError("header deinterleaver expects exactly 80 values")
    return values[HEADER_PERM]


def interleave_payload(values, n_blocks: int) -> np.ndarray:
    """Spread a coded stream over ``n_blocks`` 48-bit hopping blocks.

    Block q of the output carries every n_blocks-th coded bit (those with
    index == q mod n_blocks), so losing one hop erases an evenly spaced
    fraction of the stream.  With a single block this is the identity.
    """
    values = np.asarray(values)
    if values.size != n_blocks * PAYLOAD_BLOCK_BITS:
        raise ValueError("payload interleaver input must fill all blocks")
    return values.reshape(PAYLOAD_BLOCK_BITS, n_blocks).T.reshape(-1)


def deinterleave_payload(values, n_blocks: int) -> np.ndarray:
    """Inverse of :func:`interleave_payload` (stride-48 read order)."""
    values = np.asarray(values)
    if values.size != n_blocks * PAYLOAD_BLOCK_BITS:
        raise ValueError("payload deinterleaver input must fill all blocks")
    return values.reshape(n_blocks, PAYLOAD_BLOCK_BITS).T.reshape(-1)
