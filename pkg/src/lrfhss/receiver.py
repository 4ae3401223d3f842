"""Gateway receiver: detections to decoded packets.

Detections are attempted in descending detection-statistic order.
Duplicate hits on the same burst (the coarse CFO grid and Doppler bin
spillover can fire twice per header) are pre-filtered by bin/lag
proximity to already-decoded headers.  CRC-clean headers are grouped
into packets by their announced parameters and consistent packet start;
each header must also sit on the channel its packet's hopping plan
assigns to its replica index, which weeds out rare false CRC passes.

Each packet group yields a carrier-trajectory fit across its decoded
replicas, every announced payload fragment is demodulated along that
trajectory, and the fragment soft bits feed the payload decoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channelizer import ChannelizedSignal
from .config import GmskParams, PacketConfig
from .detect import Detection, detect_headers
from .frame import HeaderInfo, decode_payload_soft
from .headerrx import HeaderDecode, decode_header_burst
from .hopping import HopPlan, hop_sequence
from .payloadrx import (
    PacketEstimate,
    demodulate_fragment,
    fit_packet_estimate,
    signed_bin_offset,
)

_HEADER_OUT = 228  # output samples per header replica
_START_TOL = 8.0  # packet-start agreement between replicas, output samples
_MAX_BIN_WALK = 2  # Doppler may push a detection this many bins off
MAX_HEADER_ATTEMPTS = 24


@dataclass
class PacketDecode:
    """One packet as recovered by the full receive chain."""

    info: HeaderInfo
    payload: bytes
    crc_ok: bool
    estimate: PacketEstimate
    headers: list[HeaderDecode] = field(default_factory=list)
    fragment_metrics: np.ndarray | None = None


def _duplicate(det: Detection, done: list[HeaderDecode]) -> bool:
    for h in done:
        d_bin = (det.bin_index - h.detection.bin_index + 64) % 128 - 64
        if abs(d_bin) <= 1 and abs(det.lag - h.start) <= 8:
            return True
    return False


def _group_headers(
    headers: list[HeaderDecode],
) -> list[list[HeaderDecode]]:
    """Cluster decoded headers into packets: identical announced
    parameters and agreeing packet starts."""
    groups: list[tuple[tuple, float, list[HeaderDecode]]] = []
    for h in sorted(headers, key=lambda h: h.metric, reverse=True):
        key = (
            h.info.hop_seed,
            h.info.payload_len,
            h.info.coding_rate,
            h.info.fragment_count,
        )
        start = h.start - _HEADER_OUT * h.info.replica_idx
        for gkey, gstart, members in groups:
            if gkey == key and abs(start - gstart) <= _START_TOL:
                if all(
                    m.info.replica_idx != h.info.replica_idx
                    for m in members
                ):
                    members.append(h)
                break
        else:
            groups.append((key, start, [h]))
    return [members for _, _, members in groups]


def _plan_consistent(h: HeaderDecode, plan: HopPlan, chcfg) -> bool:
    channel = int(plan.channel_indices[h.info.replica_idx])
    off = signed_bin_offset(h.detection.bin_index, channel, chcfg)
    return abs(off) <= _MAX_BIN_WALK


def receive_packets(
    chs: ChannelizedSignal,
    config: PacketConfig,
    gmsk: GmskParams | None = None,
    threshold: float = 0.26,
    max_header_attempts: int = MAX_HEADER_ATTEMPTS,
    expect_packets: int | None = None,
) -> list[PacketDecode]:
    """Run the full receive chain on one channelized capture.

    ``expect_packets`` stops header attempts early once that many packets
    have all their header replicas decoded — the worthwhile shortcut when
    the caller knows how many packets the capture holds (detection
    sidelobes of an already-fully-decoded packet would otherwise burn
    decode attempts).
    """
    gmsk = gmsk or GmskParams()
    dets = sorted(
        detect_headers(chs, config, gmsk, threshold=threshold),
        key=lambda d: d.stat,
        reverse=True,
    )

    decoded: list[HeaderDecode] = []
    attempts = 0
    for det in dets:
        if attempts >= max_header_attempts:
            break
        if _duplicate(det, decoded):
            continue
        attempts += 1
        h = decode_header_burst(chs, det, config, gmsk)
        if h is not None:
            decoded.append(h)
            if expect_packets is not None:
                complete = sum(
                    len(g) >= config.n_header_replicas
                    for g in _group_headers(decoded)
                )
                if complete >= expect_packets:
                    break

    packets = []
    for members in _group_headers(decoded):
        info = members[0].info
        n_blocks = config.n_header_replicas + info.fragment_count
        plan = hop_sequence(config, n_blocks, seed=info.hop_seed)
        members = [
            m for m in members if _plan_consistent(m, plan, chs.config)
        ]
        if not members:
            continue
        est = fit_packet_estimate(members, plan, chs.config)

        soft_blocks, metrics = [], []
        for j in range(info.fragment_count):
            channel = int(
                plan.channel_indices[config.n_header_replicas + j]
            )
            soft, metric = demodulate_fragment(
                chs, channel, j, est, config, gmsk
            )
            soft_blocks.append(soft)
            metrics.append(metric)
        payload, ok = decode_payload_soft(
            soft_blocks, info.payload_len, info.coding_rate
        )
        packets.append(
            PacketDecode(
                info=info,
                payload=payload,
                crc_ok=ok,
                estimate=est,
                headers=members,
                fragment_metrics=np.array(metrics),
            )
        )
    return packets
