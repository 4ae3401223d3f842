"""Header burst decoding from a single detection.

Pipeline: extract a guarded 2 samples/symbol segment from the detected
bin stream, wipe the detector's coarse CFO, estimate fractional timing
on the syncword and align.  Then search a grid of Doppler-rate
hypotheses.  Each hypothesis is de-ramped by a quadratic phase pinned at
the syncword center — which keeps the syncword-based fine CFO and phase
estimates valid for every hypothesis — and scored with a single coherent
sequence-detector pass over all 113 observable symbols, the 32 syncword
bits and the first termination bit clamped as known.

The best few hypotheses go through deinterleaving, depuncturing and
Viterbi decoding.  A candidate whose CRC-8 fails is not discarded
outright: its tentative bits are re-encoded, the clean burst they imply
is wiped off the received one, a small frequency/Doppler-rate/phase
chirp fit on the residual carrier sharpens the hypothesis, and the
candidate is decoded again.  At the operating SNRs this
decode-fit-decode loop recovers most headers whose initial grid
hypothesis was a half-step off.

A successful decode is refined against the reconstructed clean burst:
wiping the now-known data leaves the residual carrier, from which
corrected CFO, Doppler-rate and fractional-timing estimates are drawn.
Those estimates are what the payload demodulator uses to place and mix
every fragment, so their accuracy — not the raw detector's — sets the
packet-level performance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channelizer import ChannelizedSignal
from .config import GmskParams, PacketConfig, SYNCWORD_SYMBOLS
from .config import CodingRate, HEADER_INFO_BITS
from .convcode import conv_encode, depuncture, puncture, viterbi_decode
from .detect import Detection
from .frame import HeaderInfo, header_block, syncword_bits
from .gmsk import gmsk_modulate
from .interleave import deinterleave_header, interleave_header
from .sova import derotate, forward_trellis, observation_pairs, run_sova
from .sync import (
    align_fractional,
    estimate_fine_cfo,
    estimate_phase,
    estimate_timing,
    extract_segment,
    sync_reference,
)

DOPPLER_GRID_HZ_S = 20.0
DOPPLER_MAX_HZ_S = 400.0
TOP_CANDIDATES = 4  # hypotheses offered to the Viterbi/CRC stage
FIT_ITERATIONS = 3  # decode/chirp-fit rounds per kept hypothesis
HEADER_STEPS = 113  # observable trellis steps in one header burst
_GUARD = 4  # spare samples kept on each side of the nominal burst
_BURST = 228  # header burst length, output samples
_SYNC_CENTER = 32  # syncword center, output samples from burst start
_FINE = 16  # fractional-lag steps per output sample (timing refinement)

# residual chirp-fit search grids (around the current hypothesis); the
# rate grid spans 1.5 hypothesis steps so a ranking error of one grid
# row is still recoverable
_FIT_F_HZ = np.arange(-4.0, 4.01, 0.25)
_FIT_RHO_HZ_S = np.arange(-45.0, 45.1, 1.0)

# after pinning de-ramp and coarse CFO at the sync center the leftover
# carrier offset is bounded by half a detector frequency step plus
# estimation noise; restricting the search keeps noise outliers from
# ruining otherwise good hypothesis rows
_SYNC_CFO_SPAN_HZ = 8.0


@dataclass
class HeaderDecode:
    """One successfully decoded header replica with refined estimates."""

    info: HeaderInfo
    detection: Detection
    start: float  # burst start, output samples from stream start
    cfo_hz: float  # carrier offset from the detected bin, at sync center
    doppler_hz_s: float
    metric: float  # total path metric of the winning hypothesis

    @property
    def sync_center(self) -> float:
        """Anchor instant of cfo_hz/doppler_hz_s, output samples."""
        return self.start + _SYNC_CENTER


def doppler_candidates() -> np.ndarray:
    return np.arange(
        -DOPPLER_MAX_HZ_S, DOPPLER_MAX_HZ_S + 1, DOPPLER_GRID_HZ_S
    )


def _known_bits(syncword: int) -> np.ndarray:
    kb = np.full(HEADER_STEPS, -1, dtype=np.int64)
    kb[:SYNCWORD_SYMBOLS] = syncword_bits(syncword)
    kb[-1] = 0  # first termination bit
    return kb


def _tentative_reference(info_bits: np.ndarray, syncword: int,
                         gmsk: GmskParams) -> np.ndarray:
    """Clean 2 samples/symbol burst implied by (possibly wrong) decoded
    info bits, used to wipe the data off for the residual chirp fit."""
    coded = interleave_header(
        puncture(conv_encode(info_bits), CodingRate.R1_2)
    )
    bits = np.concatenate(
        [syncword_bits(syncword), coded, np.zeros(2, dtype=np.uint8)]
    )
    return gmsk_modulate(bits, gmsk, 2)


def _chirp_fit(resid: np.ndarray,
               t: np.ndarray) -> tuple[float, float, float]:
    """Maximum-|correlation| (frequency, Doppler-rate, phase) of a
    residual carrier over small search grids.

    Works on the squared residual: a wrong tentative bit flips the
    modulation parity — and hence the residual's sign — for the whole
    rest of the burst, but pi flips vanish under squaring, so the fit
    tolerates tentative-decode errors.  The phase comes back modulo pi;
    the detector's free parity state absorbs the ambiguity.
    """
    w = resid * resid
    e_f = np.exp(-4j * np.pi * _FIT_F_HZ[:, None] * t)
    e_r = np.exp(-2j * np.pi * _FIT_RHO_HZ_S[:, None] * t * t)
    m = np.einsum("n,fn,rn->fr", w, e_f, e_r)
    i, j = np.unravel_index(np.argmax(np.abs(m)), m.shape)
    return (float(_FIT_F_HZ[i]), float(_FIT_RHO_HZ_S[j]),
            float(np.angle(m[i, j]) / 2.0))


def _attempt(soft_coded: np.ndarray) -> tuple[np.ndarray, HeaderInfo | None]:
    """Viterbi-decode 80 soft coded symbols; None info on CRC/format
    failure (the tentative bits are still returned for the data wipe)."""
    bits, _ = viterbi_decode(
        depuncture(deinterleave_header(soft_coded), CodingRate.R1_2),
        HEADER_INFO_BITS,
    )
    try:
        return bits, HeaderInfo.unpack(bits)
    except ValueError:
        return bits, None


def _refine_frequency(seg: np.ndarray, ref: np.ndarray,
                      rate: float) -> tuple[float, float]:
    """(CFO at the sync center, Doppler-rate correction) from the
    data-wiped burst, via split-segment frequency estimates."""
    half = seg.size // 2
    f1 = estimate_fine_cfo(seg[:half], ref[:half], rate, max_hz=15.0)
    f2 = estimate_fine_cfo(seg[half:], ref[half:], rate, max_hz=15.0)
    d_rho = (f2 - f1) * rate / half
    center1 = (half - 1) / 2
    f_sync = f1 + d_rho * (_SYNC_CENTER - center1) / rate
    return f_sync, d_rho


def _refine_timing(seg: np.ndarray, ref_fine: np.ndarray) -> float:
    """Fractional-lag correction (output samples) from a matched-filter
    scan of the whole data-wiped-carrier burst on a 1/16-sample grid."""
    j = np.arange(8, 220)
    d = np.arange(-24, 25)
    idx = j[None, :] * _FINE - d[:, None]
    stat = np.abs(np.conj(ref_fine[idx]) @ seg[j]) ** 2
    i = int(np.argmax(stat))
    tau = d[i] / _FINE
    if 0 < i < d.size - 1:
        s0, s1, s2 = stat[i - 1], stat[i], stat[i + 1]
        denom = s0 - 2 * s1 + s2
        if denom < 0:
            tau += 0.5 * (s0 - s2) / denom / _FINE
    return float(tau)


def decode_header_burst(
    chs: ChannelizedSignal,
    det: Detection,
    config: PacketConfig,
    gmsk: GmskParams | None = None,
) -> HeaderDecode | None:
    """Attempt to decode the header burst behind one detection.

    Returns None when no Doppler hypothesis yields a CRC-clean header.
    """
    gmsk = gmsk or GmskParams()
    rate = chs.config.output_rate
    stream = chs.bin_stream(det.bin_index)

    seg = extract_segment(stream, det.lag - _GUARD, _BURST + 2 * _GUARD)
    n = np.arange(seg.size)
    seg = seg * np.exp(-2j * np.pi * det.cfo_hz * n / rate)

    tau, _ = estimate_timing(seg[_GUARD:], config.syncword, gmsk)
    work = align_fractional(seg, tau)[_GUARD:_GUARD + _BURST]

    t = (np.arange(_BURST) - _SYNC_CENTER) / rate
    rhos = doppler_candidates()
    deramped = work[None, :] * np.exp(-1j * np.pi * rhos[:, None] * t * t)

    ref = sync_reference(config.syncword, gmsk.bt, gmsk.span)
    fines = np.array([
        estimate_fine_cfo(row[: ref.size], ref, rate,
                          max_hz=_SYNC_CFO_SPAN_HZ)
        for row in deramped
    ])
    rows = deramped * np.exp(-2j * np.pi * fines[:, None] * t)
    phases = np.array([
        estimate_phase(row[: ref.size], ref) for row in rows
    ])
    rows = rows * np.exp(-1j * phases[:, None])

    trellis = forward_trellis(gmsk)
    kb = _known_bits(config.syncword)
    first = run_sova(
        derotate(observation_pairs(rows, HEADER_STEPS), axis=-2),
        trellis, known_bits=kb,
    )

    for c in np.argsort(first.metric)[::-1][:TOP_CANDIDATES]:
        row = rows[c]
        acc_f = float(fines[c])
        acc_rho = float(rhos[c])
        soft_coded = first.soft[c, SYNCWORD_SYMBOLS: SYNCWORD_SYMBOLS + 80]
        metric = float(first.metric[c])
        for it in range(FIT_ITERATIONS + 1):
            info_bits, info = _attempt(soft_coded)
            if info is not None or it == FIT_ITERATIONS:
                break
            # wipe the tentative data and sharpen the carrier hypothesis
            wipe = _tentative_reference(info_bits, config.syncword, gmsk)
            d_f, d_rho, d_phi = _chirp_fit(row * np.conj(wipe), t)
            row = row * np.exp(
                -1j * (2 * np.pi * d_f * t + np.pi * d_rho * t * t + d_phi)
            )
            acc_f += d_f
            acc_rho += d_rho
            again = run_sova(
                derotate(observation_pairs(row, HEADER_STEPS), axis=-2),
                trellis, known_bits=kb,
            )
            soft_coded = again.soft[0, SYNCWORD_SYMBOLS: SYNCWORD_SYMBOLS + 80]
            metric = float(again.metric[0])
        if info is None:
            continue

        # data wipe with the now-exact bits: pull corrected carrier and
        # timing estimates from the residual for the payload stage
        bits114 = header_block(info, config).bits
        ref_fine = gmsk_modulate(bits114, gmsk, 2 * _FINE)
        ref_burst = ref_fine[::_FINE]
        f_sync, d_rho = _refine_frequency(row, ref_burst, rate)
        resid = row * np.exp(
            -1j * (2 * np.pi * f_sync * t + np.pi * d_rho * t * t)
        )
        d_tau = _refine_timing(resid, ref_fine)
        return HeaderDecode(
            info=info,
            detection=det,
            start=det.lag + tau + d_tau,
            cfo_hz=det.cfo_hz + acc_f + f_sync,
            doppler_hz_s=acc_rho + d_rho,
            metric=metric,
        )
    return None
