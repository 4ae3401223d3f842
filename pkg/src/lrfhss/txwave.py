"""Packet waveform synthesis: hopping blocks to wideband IQ.

Each block is GMSK-modulated at baseband with a fresh phase accumulator,
shifted to its hopping channel and placed back-to-back on the packet
timeline.  Channel c sits at (c - n_channels/2) * channel_spacing relative
to the band centre.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import GmskParams, PacketConfig
from .frame import BitBlock, build_packet
from .gmsk import gmsk_modulate
from .hopping import HopPlan, hop_sequence
from .iqbuf import IqBuffer


@dataclass
class Placement:
    """Where one hopping block landed in the synthesized packet."""

    kind: str
    index: int
    channel: int
    start_sample: int  # wideband samples from packet start
    n_symbols: int


@dataclass
class PacketSignal:
    """Synthesized packet: IQ plus the block placement map."""

    iq: IqBuffer
    placements: list[Placement]
    config: PacketConfig
    osr: int  # wideband samples per symbol


def synthesize_packet(blocks: list[BitBlock], plan: HopPlan,
                      config: PacketConfig, sample_rate: float,
                      gmsk: GmskParams | None = None) -> PacketSignal:
    """Modulate and place all hopping blocks of one packet.

    ``sample_rate`` must be an even integer multiple of the symbol rate
    (the trellis samples mid-symbol).  Every block keeps unit envelope
    during its slot; slots never overlap.
    """
    if gmsk is None:
        gmsk = GmskParams(symbol_rate=config.symbol_rate)
    osr_f = sample_rate / config.symbol_rate
    osr = round(osr_f)
    if abs(osr_f - osr) > 1e-9 or osr % 2:
        raise ValueError(
            "sample_rate must be an even integer multiple of symbol rate"
        )
    if len(blocks) != len(plan):
        raise ValueError("one hop channel needed per block")
    n_samples = sum(b.bits.size for b in blocks) * osr
    out = np.zeros(n_samples, dtype=np.complex128)
    placements = []
    pos = 0
    for block, chan in zip(blocks, plan.channel_indices):
        chan = int(chan)
        burst = gmsk_modulate(block.bits, gmsk, osr)
        f_norm = (chan - config.n_channels // 2) \
            * config.channel_spacing_hz / sample_rate
        n = np.arange(burst.size)
        out[pos:pos + burst.size] = burst * np.exp(2j * np.pi * f_norm * n)
        placements.append(
            Placement(block.kind, block.index, chan, pos, block.bits.size)
        )
        pos += burst.size
    return PacketSignal(
        iq=IqBuffer(out, sample_rate),
        placements=placements,
        config=config,
        osr=osr,
    )


def make_packet_signal(config: PacketConfig, payload: bytes,
                       sample_rate: float,
                       gmsk: GmskParams | None = None) -> PacketSignal:
    """Convenience: frame, hop and synthesize one packet."""
    blocks = build_packet(config, payload)
    plan = hop_sequence(config, len(blocks))
    return synthesize_packet(blocks, plan, config, sample_rate, gmsk)
