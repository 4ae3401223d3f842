"""Packet framing: header fields, CRCs, coding and block assembly.

A packet is an ordered list of hopping blocks.  Every header replica is a
114-symbol block: 32 syncword bits, 80 interleaved coded header bits and 2
zero termination bits.  Every payload fragment is a 50-symbol block: 48
interleaved coded bits and 2 zero termination bits.

Header field layout (26 bits, MSB first, followed by CRC-8 and 6 zero
tail bits for a 40-bit encoder input):

    payload_len:6  coding_rate:2  hop_seed:11  fragment_count:5  replica_idx:2

The replica index lets the receiver place the payload relative to
whichever header copy it decoded.  The CRC-8 covers the 26 field bits
only, not the tail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import (
    CodingRate,
    HEADER_CODED_BITS,
    HEADER_INFO_BITS,
    HEADER_SYMBOLS,
    MAX_PAYLOAD_LEN,
    PAYLOAD_BLOCK_BITS,
    PAYLOAD_FRAGMENT_SYMBOLS,
    PacketConfig,
    SYNCWORD_SYMBOLS,
    TAIL_BITS,
    info_bits_for_payload,
)
from . import convcode, crc, interleave

HEADER_FIELD_BITS = 26
TERMINATION_BITS = 2  # per hopping block, always zero

_FIELD_WIDTHS = (6, 2, 11, 5, 2)  # len, rate, seed, fragments, replica


@dataclass
class HeaderInfo:
    """Decoded or to-be-sent header fields for one header replica."""

    payload_len: int
    coding_rate: CodingRate
    hop_seed: int
    fragment_count: int
    replica_idx: int

    def __post_init__(self):
        if not 1 <= self.payload_len <= MAX_PAYLOAD_LEN:
            raise ValueError("payload_len must be in 1..32")
        if not 0 <= self.hop_seed < 2**11:
            raise ValueError("hop_seed must fit in 11 bits")
        if not 0 <= self.fragment_count < 2**5:
            raise ValueError("fragment_count must fit in 5 bits")
        if not 0 <= self.replica_idx < 2**2:
            raise ValueError("replica_idx must fit in 2 bits")

    def pack(self) -> np.ndarray:
        """40 encoder input bits: fields, CRC-8, zero tail."""
        vals = (
            self.payload_len,
            self.coding_rate.field_bits,
            self.hop_seed,
            self.fragment_count,
            self.replica_idx,
        )
        bits = []
        for v, w in zip(vals, _FIELD_WIDTHS):
            bits.extend((v >> (w - 1 - i)) & 1 for i in range(w))
        fields = np.array(bits, dtype=np.uint8)
        out = np.concatenate(
            [fields, crc.crc8(fields), np.zeros(TAIL_BITS, dtype=np.uint8)]
        )
        assert out.size == HEADER_INFO_BITS
        return out

    @classmethod
    def unpack(cls, bits) -> "HeaderInfo":
        """Parse 40 decoded bits.  Raises ValueError on CRC or tail failure."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size != HEADER_INFO_BITS:
            raise ValueError("header info must be 40 bits")
        if not crc.crc8_ok(bits[: HEADER_FIELD_BITS + 8]):
            raise ValueError("header CRC-8 failed")
        if bits[HEADER_FIELD_BITS + 8:].any():
            raise ValueError("header tail bits not zero")
        vals = []
        pos = 0
        for w in _FIELD_WIDTHS:
            v = 0
            for i in range(w):
                v = (v << 1) | int(bits[pos + i])
            vals.append(v)
            pos += w
        return cls(
            payload_len=vals[0],
            coding_rate=CodingRate.from_field_bits(vals[1]),
            hop_seed=vals[2],
            fragment_count=vals[3],
            replica_idx=vals[4],
        )


@dataclass
class BitBlock:
    """One hopping block in the bit domain (symbol bits, pre-modulation)."""

    kind: str  # 'header' or 'payload'
    index: int  # replica index or fragment index
    bits: np.ndarray

    def __post_init__(self):
        expect = HEADER_SYMBOLS if self.kind == "header" else \
            PAYLOAD_FRAGMENT_SYMBOLS
        if self.kind not in ("header", "payload"):
            raise ValueError("kind must be 'header' or 'payload'")
        if self.bits.size != expect:
            raise ValueError(f"{self.kind} block must hold {expect} bits")


def syncword_bits(syncword: int) -> np.ndarray:
    """32 syncword bits, MSB first, no precoding."""
    return np.array(
        [(syncword >> (31 - i)) & 1 for i in range(SYNCWORD_SYMBOLS)],
        dtype=np.uint8,
    )


def encode_header_bits(info: HeaderInfo) -> np.ndarray:
    """80 interleaved coded header bits for one replica."""
    coded = convcode.puncture(
        convcode.conv_encode(info.pack()), CodingRate.R1_2
    )
    assert coded.size == HEADER_CODED_BITS
    return interleave.interleave_header(coded)


def header_block(info: HeaderInfo, config: PacketConfig) -> BitBlock:
    bits = np.concatenate(
        [
            syncword_bits(config.syncword),
            encode_header_bits(info),
            np.zeros(TERMINATION_BITS, dtype=np.uint8),
        ]
    )
    return BitBlock("header", info.replica_idx, bits)


def encode_payload_bits(payload: bytes, rate: CodingRate) -> np.ndarray:
    """Interleaved coded payload stream, padded to whole 48-bit blocks."""
    info = np.concatenate(
        [
            crc.bytes_to_bits(payload),
            crc.crc16(crc.bytes_to_bits(payload)),
            np.zeros(TAIL_BITS, dtype=np.uint8),
        ]
    )
    padded = convcode.padded_info_len(info.size, rate)
    info = np.concatenate(
        [info, np.zeros(padded - info.size, dtype=np.uint8)]
    )
    coded = convcode.puncture(convcode.conv_encode(info), rate)
    n_blocks = -(-coded.size // PAYLOAD_BLOCK_BITS)
    filled = np.zeros(n_blocks * PAYLOAD_BLOCK_BITS, dtype=np.uint8)
    filled[: coded.size] = coded
    return interleave.interleave_payload(filled, n_blocks)


def build_packet(config: PacketConfig, payload: bytes) -> list[BitBlock]:
    """Assemble all hopping blocks for one packet.

    Returns ``n_header_replicas`` header blocks followed by the payload
    fragments, in transmission order.
    """
    if not 1 <= len(payload) <= config.payload_len:
        raise ValueError(
            f"payload must be 1..{config.payload_len} bytes, "
            f"got {len(payload)}"
        )
    stream = encode_payload_bits(payload, config.coding_rate)
    n_frag = stream.size // PAYLOAD_BLOCK_BITS
    assert n_frag == config.fragment_count(len(payload))
    blocks = []
    for h in range(config.n_header_replicas):
        info = HeaderInfo(
            payload_len=len(payload),
            coding_rate=config.coding_rate,
            hop_seed=config.hop_seed,
            fragment_count=n_frag,
            replica_idx=h,
        )
        blocks.append(header_block(info, config))
    term = np.zeros(TERMINATION_BITS, dtype=np.uint8)
    for f in range(n_frag):
        part = stream[f * PAYLOAD_BLOCK_BITS:(f + 1) * PAYLOAD_BLOCK_BITS]
        blocks.append(BitBlock("payload", f, np.concatenate([part, term])))
    return blocks


def decode_payload_soft(soft_blocks, payload_len: int,
                        rate: CodingRate) -> tuple[bytes, bool]:
    """Decode payload soft bits collected from all fragments.

    Args:
        soft_blocks: sequence of per-fragment soft arrays (48 values each,
            termination symbols already stripped); missing fragments must
            be passed as all-zero (erased) blocks.
        payload_len: payload size in bytes, from the decoded header.
        rate: coding rate, from the decoded header.

    Returns:
        (payload bytes, CRC-16 ok flag).
    """
    stream = np.concatenate([np.asarray(b, dtype=np.float64)
                             for b in soft_blocks])
    n_blocks = stream.size // PAYLOAD_BLOCK_BITS
    if stream.size % PAYLOAD_BLOCK_BITS:
        raise ValueError("soft blocks must be 48 values each")
    deint = interleave.deinterleave_payload(stream, n_blocks)
    n_info = convcode.padded_info_len(
        info_bits_for_payload(payload_len), rate
    )
    kept = convcode.punctured_length(info_bits_for_payload(payload_len), rate)
    soft = convcode.depuncture(deint[:kept], rate)
    bits, _ = convcode.viterbi_decode(soft, n_info)
    msg = bits[: 8 * (payload_len + 2)]
    ok = crc.crc16_ok(msg)
    return crc.bits_to_bytes(msg[: 8 * payload_len]), bool(ok)


def parse_packet(blocks, config: PacketConfig) -> tuple[bytes, HeaderInfo]:
    """Bit-domain inverse of :func:`build_packet` (noiseless loopback).

    Raises ValueError if the header or payload CRC fails.
    """
    headers = [b for b in blocks if b.kind == "header"]
    payloads = [b for b in blocks if b.kind == "payload"]
    if not headers:
        raise ValueError("no header block present")
    hb = headers[0].bits
    coded = interleave.deinterleave_header(
        hb[SYNCWORD_SYMBOLS:SYNCWORD_SYMBOLS + HEADER_CODED_BITS]
    ).astype(np.float64) * 2.0 - 1.0
    soft = convcode.depuncture(coded, CodingRate.R1_2)
    bits, _ = convcode.viterbi_decode(soft, HEADER_INFO_BITS)
    info = HeaderInfo.unpack(bits)
    soft_blocks = [
        b.bits[:PAYLOAD_BLOCK_BITS].astype(np.float64) * 2.0 - 1.0
        for b in sorted(payloads, key=lambda b: b.index)
    ]
    payload, ok = decode_payload_soft(
        soft_blocks, info.payload_len, info.coding_rate
    )
    if not ok:
        raise ValueError("payload CRC-16 failed")
    return payload, info
