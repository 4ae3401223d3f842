"""CRC generation and checking over bit arrays.

Both CRCs used by the frame layer are plain MSB-first shift-register CRCs
without reflection or final XOR.  The checker property holds for both: a
message followed by its own CRC leaves the register at zero.
"""

from __future__ import annotations

import numpy as np

CRC16_POLY = 0x1021
CRC16_INIT = 0xFFFF
CRC8_POLY = 0x07
CRC8_INIT = 0x00


def crc_bits(bits, poly: int, width: int, init: int) -> np.ndarray:
    """CRC register contents after shifting ``bits`` through, MSB-first.

    Args:
        bits: iterable of 0/1 values.
        poly: generator polynomial without the leading term.
        width: register width in bits.
        init: initial register value.

    Returns:
        Register as a ``width``-long uint8 array, MSB first.
    """
    reg = init
    top = 1 << (width - 1)
    mask = (1 << width) - 1
    for b in np.asarray(bits, dtype=np.uint8):
        fb = ((reg >> (width - 1)) ^ int(b)) & 1
        reg = (reg << 1) & mask
        if fb:
            reg ^= poly
    return np.array([(reg >> (width - 1 - i)) & 1 for i in range(width)],
                    dtype=np.uint8)


def crc16(bits) -> np.ndarray:
    """16-bit CRC (poly 0x1021, init 0xFFFF) of a bit array."""
    return crc_bits(bits, CRC16_POLY, 16, CRC16_INIT)


def crc8(bits) -> np.ndarray:
    """8-bit CRC (poly 0x07, init 0x00) of a bit array."""
    return crc_bits(bits, CRC8_POLY, 8, CRC8_INIT)


def crc16_ok(bits_with_crc) -> bool:
    """True iff the register is zero after message plus appended CRC-16."""
    reg = crc_bits(bits_with_crc, CRC16_POLY, 16, CRC16_INIT)
    return not reg.any()


def crc8_ok(bits_with_crc) -> bool:
    """True iff the register is zero after message plus appended CRC-8."""
    reg = crc_bits(bits_with_crc, CRC8_POLY, 8, CRC8_INIT)
    return not reg.any()


def bytes_to_bits(data: bytes) -> np.ndarray:
    """MSB-first bit expansion."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 8:
        raise ValueError("bit count must be a multiple of 8")
    return np.packbits(bits).tobytes()
