"""Payload fragment demodulation from header-derived packet estimates.

Payload fragments carry no pilots.  Each one is located purely from
packet geometry — fragment j occupies the 100 output samples that follow
the header replicas and j earlier fragments — on the channel given by
the regenerated hopping plan.  The carrier is removed along the
frequency trajectory fitted to the decoded header replicas; what remains
per fragment is an unknown constant phase and a small leftover
frequency, resolved by scoring a bank of frequency-by-phase hypotheses
with the coherent sequence detector and keeping the best metric.

One refinement round mirrors the header path: the winning hypothesis'
tentative bits are wiped off, a chirp fit on the squared residual (which
cancels the parity flips caused by tentative-bit errors) centers the
carrier, and the detector runs once more to produce the final 48 soft
coded bits.  Fragments that fall outside the captured stream contribute
all-zero (erased) soft bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channelizer import ChannelizedSignal
from .config import (
    GmskParams,
    HEADER_SYMBOLS,
    PAYLOAD_BLOCK_BITS,
    PAYLOAD_FRAGMENT_SYMBOLS,
    PacketConfig,
)
from .gmsk import gmsk_modulate
from .headerrx import HeaderDecode
from .hopping import HopPlan
from .sova import derotate, forward_trellis, observation_pairs, run_sova
from .sync import align_fractional, extract_segment

FRAGMENT_OUT = 2 * PAYLOAD_FRAGMENT_SYMBOLS  # output samples per fragment
FRAGMENT_STEPS = PAYLOAD_FRAGMENT_SYMBOLS - 1  # observable trellis steps
_HEADER_OUT = 2 * HEADER_SYMBOLS
_GUARD = 3

# hypothesis bank: leftover carrier frequency after the fitted trajectory
# is removed, crossed with the per-fragment constant phase (modulo pi;
# the detector's parity state absorbs the other half turn)
_FREQ_HZ = np.arange(-18.0, 18.1, 6.0)
_PHASE_RAD = np.arange(8) * (np.pi / 8.0)

# refinement grids for the squared-residual chirp fit
_FIT_F_HZ = np.arange(-5.0, 5.01, 0.25)
_FIT_RHO_HZ_S = np.arange(-12.0, 12.1, 1.5)

# per-header estimate spreads used as least-squares weights
_SIGMA_F_HZ = 1.0
_SIGMA_RHO_HZ_S = 6.0


@dataclass
class PacketEstimate:
    """Packet-level geometry and carrier trajectory.

    ``cfo_hz`` is the carrier offset from the hopping-channel centers at
    ``packet_start``; the offset at output sample u is
    cfo_hz + doppler_hz_s * (u - packet_start) / output_rate.
    """

    packet_start: float  # output samples from stream start
    cfo_hz: float
    doppler_hz_s: float

    def offset_at(self, u: float, rate: float) -> float:
        return self.cfo_hz + self.doppler_hz_s * (u - self.packet_start) / rate


def signed_bin_offset(bin_index: int, channel: int, chcfg) -> int:
    """Detected bin minus the channel's own bin, wrapped to
    [-fft_size/2, fft_size/2)."""
    n = chcfg.fft_size
    return (bin_index - chcfg.bin_for_channel(channel) + n // 2) % n - n // 2


def fit_packet_estimate(headers: list[HeaderDecode], plan: HopPlan,
                        chcfg) -> PacketEstimate:
    """Weighted least-squares carrier trajectory through the decoded
    header replicas.

    Each replica contributes its absolute frequency offset (detected-bin
    offset plus refined CFO) at its syncword center and its own
    Doppler-rate estimate.  One replica is enough; more tighten the fit.
    """
    if not headers:
        raise ValueError("need at least one decoded header")
    rate = chcfg.output_rate
    starts = [h.start - _HEADER_OUT * h.info.replica_idx for h in headers]
    packet_start = float(np.mean(starts))

    rows, vals = [], []
    for h in headers:
        channel = int(plan.channel_indices[h.info.replica_idx])
        f_abs = (
            signed_bin_offset(h.detection.bin_index, channel, chcfg)
            * chcfg.bin_spacing_hz
            + h.cfo_hz
        )
        t = (h.sync_center - packet_start) / rate
        rows.append([1.0 / _SIGMA_F_HZ, t / _SIGMA_F_HZ])
        vals.append(f_abs / _SIGMA_F_HZ)
        rows.append([0.0, 1.0 / _SIGMA_RHO_HZ_S])
        vals.append(h.doppler_hz_s / _SIGMA_RHO_HZ_S)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(vals), rcond=None)
    return PacketEstimate(
        packet_start=packet_start,
        cfo_hz=float(sol[0]),
        doppler_hz_s=float(sol[1]),
    )


def _fragment_known_bits() -> np.ndarray:
    kb = np.full(FRAGMENT_STEPS, -1, dtype=np.int64)
    kb[-1] = 0  # first termination bit
    return kb


def _chirp_fit(resid: np.ndarray,
               t: np.ndarray) -> tuple[float, float, float]:
    """(frequency, Doppler-rate, phase) of the squared residual carrier;
    squaring cancels the parity flips of wrong tentative bits."""
    w = resid * resid
    e_f = np.exp(-4j * np.pi * _FIT_F_HZ[:, None] * t)
    e_r = np.exp(-2j * np.pi * _FIT_RHO_HZ_S[:, None] * t * t)
    m = np.einsum("n,fn,rn->fr", w, e_f, e_r)
    i, j = np.unravel_index(np.argmax(np.abs(m)), m.shape)
    return (float(_FIT_F_HZ[i]), float(_FIT_RHO_HZ_S[j]),
            float(np.angle(m[i, j]) / 2.0))


def demodulate_fragment(
    chs: ChannelizedSignal,
    channel: int,
    frag_index: int,
    est: PacketEstimate,
    config: PacketConfig,
    gmsk: GmskParams | None = None,
) -> tuple[np.ndarray, float]:
    """Soft coded bits (48 values) and detector metric for one fragment.

    The fragment is pulled from the bin nearest its predicted absolute
    frequency — under LEO Doppler a late fragment may have walked one or
    two bins off its channel — mixed to baseband along the fitted
    trajectory, and demodulated with the hypothesis bank plus one
    wipe-and-refit round.
    """
    gmsk = gmsk or GmskParams()
    chcfg = chs.config
    rate = chcfg.output_rate

    start = (
        est.packet_start
        + config.n_header_replicas * _HEADER_OUT
        + frag_index * FRAGMENT_OUT
    )
    center = start + FRAGMENT_OUT / 2
    f_pred = est.offset_at(center, rate)
    shift = int(np.round(f_pred / chcfg.bin_spacing_hz))
    bin_index = (chcfg.bin_for_channel(channel) + shift) % chcfg.fft_size
    f_res = f_pred - shift * chcfg.bin_spacing_hz

    u = int(np.floor(start))
    mu = start - u
    seg = extract_segment(
        chs.bin_stream(bin_index), u - _GUARD, FRAGMENT_OUT + 2 * _GUARD
    )
    if not np.any(seg):
        return np.zeros(PAYLOAD_BLOCK_BITS), 0.0
    seg = align_fractional(seg, mu)[_GUARD:_GUARD + FRAGMENT_OUT]

    t = (np.arange(FRAGMENT_OUT) - FRAGMENT_OUT / 2) / rate
    rho = est.doppler_hz_s
    seg = seg * np.exp(-1j * (2 * np.pi * f_res * t + np.pi * rho * t * t))

    carriers = seg[None, :] * np.exp(-2j * np.pi * _FREQ_HZ[:, None] * t)
    rot = np.exp(-1j * _PHASE_RAD)
    rows = (carriers[:, None, :] * rot[None, :, None]).reshape(
        -1, FRAGMENT_OUT
    )

    trellis = forward_trellis(gmsk)
    kb = _fragment_known_bits()
    first = run_sova(
        derotate(observation_pairs(rows, FRAGMENT_STEPS), axis=-2),
        trellis, known_bits=kb,
    )
    best = int(np.argmax(first.metric))
    row = rows[best]

    # wipe tentative bits, recenter the carrier, demodulate once more
    bits = np.append(first.hard[best], 0).astype(np.uint8)
    wipe = gmsk_modulate(bits, gmsk, 2)
    d_f, d_rho, d_phi = _chirp_fit(row * np.conj(wipe), t)
    row = row * np.exp(
        -1j * (2 * np.pi * d_f * t + np.pi * d_rho * t * t + d_phi)
    )
    final = run_sova(
        derotate(observation_pairs(row, FRAGMENT_STEPS), axis=-2),
        trellis, known_bits=kb,
    )
    soft = final.soft[0, :PAYLOAD_BLOCK_BITS]
    return soft, float(final.metric[0])
