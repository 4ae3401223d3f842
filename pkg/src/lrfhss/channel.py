"""LEO channel impairments applied to the wideband packet signal.

The chain order is fixed: Doppler rate, then static CFO and phase, then
sampling-offset resampling (SFO/STO), then co-channel interference, then
AWGN.  Every stochastic stage takes an explicit seed.
"""

from __future__ import annotations

import numpy as np

from .config import (
    SYMBOL_RATE,
    GmskParams,
    ImpairmentProfile,
    PacketConfig,
)
from .gmsk import gmsk_modulate
from .iqbuf import IqBuffer
from .txwave import PacketSignal, Placement


def apply_doppler(buf: IqBuffer, rate_hz_s: float) -> IqBuffer:
    """Linear Doppler frequency ramp: phase pi * rate * t^2.

    Instantaneous frequency is rate * t, i.e. zero at t = 0 (= buf.t0
    reference), growing by ``rate_hz_s`` every second.
    """
    if rate_hz_s == 0.0:
        return buf.copy()
    t = buf.t0 + np.arange(len(buf)) / buf.sample_rate
    return IqBuffer(
        buf.samples * np.exp(1j * np.pi * rate_hz_s * t * t),
        buf.sample_rate, buf.t0,
    )


def apply_cfo_phase(buf: IqBuffer, cfo_hz: float,
                    phase_rad: float) -> IqBuffer:
    """Static carrier frequency offset and phase rotation."""
    if cfo_hz == 0.0 and phase_rad == 0.0:
        return buf.copy()
    t = buf.t0 + np.arange(len(buf)) / buf.sample_rate
    return IqBuffer(
        buf.samples * np.exp(1j * (2.0 * np.pi * cfo_hz * t + phase_rad)),
        buf.sample_rate, buf.t0,
    )


def farrow_resample(x: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Cubic Lagrange (Farrow) interpolation at fractional positions.

    Positions outside the valid 4-point support produce zeros.
    """
    n = np.floor(positions).astype(np.int64)
    mu = positions - n
    valid = (n >= 1) & (n <= x.size - 3)
    nc = np.clip(n, 1, max(x.size - 3, 1))
    xm1, x0, x1, x2 = x[nc - 1], x[nc], x[nc + 1], x[nc + 2]
    # classic cubic Lagrange weights in mu
    c0 = x0
    c1 = x1 - xm1 / 3.0 - x0 / 2.0 - x2 / 6.0
    c2 = (xm1 + x1) / 2.0 - x0
    c3 = (x2 - xm1) / 6.0 + (x0 - x1) / 2.0
    out = ((c3 * mu + c2) * mu + c1) * mu + c0
    out[~valid] = 0.0
    return out


def apply_sfo(buf: IqBuffer, sfo_ppm: float, sto_symbols: float,
              osr: int) -> IqBuffer:
    """Sampling-frequency and static sampling-time offset.

    Output sample k reads input position k*(1 + ppm*1e-6) + sto*osr,
    modelling a receiver clock that runs fast by ``sfo_ppm`` and starts
    ``sto_symbols`` late.  The interpolation runs on a 2x FFT-upsampled
    copy: hop channels far from DC sit beyond half the Nyquist band,
    where a 4-point cubic alone would add distortion comparable to the
    impairment being modelled.
    """
    if sfo_ppm == 0.0 and sto_symbols == 0.0:
        return buf.copy()
    x = buf.samples
    spec = np.fft.fft(x)
    half = x.size // 2
    pad = np.zeros(2 * x.size, dtype=complex)
    pad[:half] = spec[:half]
    pad[-(x.size - half):] = spec[half:]
    x2 = np.fft.ifft(pad) * 2.0
    k = np.arange(len(buf), dtype=np.float64)
    pos = k * (1.0 + sfo_ppm * 1e-6) + sto_symbols * osr
    return IqBuffer(farrow_resample(x2, 2.0 * pos),
                    buf.sample_rate, buf.t0)


def inject_cci(buf: IqBuffer, placements: list[Placement],
               config: PacketConfig, ratio: float, seed,
               gmsk: GmskParams | None = None) -> IqBuffer:
    """Hit exactly round(ratio * n_blocks) hopping blocks with an
    equal-power co-channel GMSK interferer.

    Victim blocks are chosen uniformly.  Each interferer is a random
    GMSK burst on the same channel covering the whole hit block, so the
    block sees 0 dB signal-to-interference ratio end to end.  That caps
    the usable SINR of hit blocks independently of Es/No, which is what
    produces an interference-limited error floor instead of a shifted
    waterfall.
    """
    n_hit = round(ratio * len(placements))
    if n_hit == 0:
        return buf.copy()
    if gmsk is None:
        gmsk = GmskParams(symbol_rate=config.symbol_rate)
    rng = np.random.default_rng(seed)
    osr = round(buf.sample_rate / config.symbol_rate)
    out = buf.samples.copy()
    hits = rng.choice(len(placements), size=n_hit, replace=False)
    for i in np.sort(hits):
        p = placements[i]
        bits = rng.integers(0, 2, p.n_symbols)
        burst = gmsk_modulate(bits, gmsk, osr)
        f_norm = (p.channel - config.n_channels // 2) \
            * config.channel_spacing_hz / buf.sample_rate
        n = np.arange(burst.size)
        burst = burst * np.exp(
            2j * np.pi * (f_norm * n + rng.uniform(0.0, 1.0)))
        start = p.start_sample
        lo, hi = max(start, 0), min(start + burst.size, out.size)
        if hi > lo:
            out[lo:hi] += burst[lo - start:hi - start]
    return IqBuffer(out, buf.sample_rate, buf.t0)


def apply_awgn(buf: IqBuffer, esno_db: float, osr: int, seed) -> IqBuffer:
    """Complex white noise at the requested symbol-energy to noise
    density ratio, assuming unit-envelope signal at ``osr`` samples per
    symbol (per-sample variance = osr / 10^(EsNo/10))."""
    rng = np.random.default_rng(seed)
    var = osr / 10.0 ** (esno_db / 10.0)
    noise = rng.normal(0.0, np.sqrt(var / 2.0), size=(2, len(buf)))
    return IqBuffer(buf.samples + noise[0] + 1j * noise[1],
                    buf.sample_rate, buf.t0)


def apply_profile(signal: PacketSignal | IqBuffer,
                  profile: ImpairmentProfile, seed,
                  osr: int | None = None) -> IqBuffer:
    """Run the full impairment chain in its fixed order.

    Accepts either a synthesized packet or a bare IQ buffer; the bare
    form cannot carry co-channel interference because that needs the
    transmit placement map, and it assumes the standard oversampling
    unless ``osr`` is given.
    """
    if isinstance(signal, IqBuffer):
        if profile.cci_ratio:
            raise ValueError(
                "co-channel interference needs the transmit placement "
                "map; impair the synthesized packet instead of a bare "
                "IQ buffer"
            )
        iq, placements, config = signal, [], None
        if osr is None:
            osr = int(round(signal.sample_rate / SYMBOL_RATE))
    else:
        iq, placements, config = signal.iq, signal.placements, \
            signal.config
        osr = signal.osr
    seeds = np.random.SeedSequence(seed).spawn(2)
    buf = apply_doppler(iq, profile.doppler_rate_hz_s)
    buf = apply_cfo_phase(buf, profile.cfo_hz, profile.phase_rad)
    buf = apply_sfo(buf, profile.sfo_ppm, profile.sto_symbols, osr)
    if profile.cci_ratio:
        buf = inject_cci(buf, placements, config,
                         profile.cci_ratio, seeds[0])
    if profile.esno_db is not None:
        buf = apply_awgn(buf, profile.esno_db, osr, seeds[1])
    return buf
