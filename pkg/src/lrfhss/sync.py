"""Fine synchronization on a detected burst's 2 samples-per-symbol stream.

Timing uses two coherent runs of syncword symbols (4..14 and 17..25,
0-based) combined noncoherently, scanned over a 1/16-sample fractional
lag grid with parabolic refinement; splitting into two runs keeps the
estimate robust to residual CFO of tens of Hz.  Fine CFO comes from a
zero-padded FFT of the syncword-wiped window, also parabolically
refined.  Phase is the matched-filter angle over the whole syncword.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .config import SYNCWORD_SYMBOLS, GmskParams
from .frame import syncword_bits
from .gmsk import gmsk_modulate

TIMING_RUN_A = np.arange(4, 15)  # syncword symbol indices, coherent run
TIMING_RUN_B = np.arange(17, 26)
_FRAC = 16  # fractional steps per output sample
_SEARCH = 2.25  # +/- lag search span, output samples


@lru_cache(maxsize=8)
def _fine_sync_burst(syncword: int, bt: float, span: int) -> np.ndarray:
    """Syncword burst at _FRAC * 2 samples per symbol for the lag bank."""
    bits = syncword_bits(syncword)
    return gmsk_modulate(bits, GmskParams(bt=bt, span=span), 2 * _FRAC)


@lru_cache(maxsize=8)
def sync_reference(syncword: int, bt: float, span: int) -> np.ndarray:
    """Syncword burst at 2 samples per symbol (64 samples)."""
    return _fine_sync_burst(syncword, bt, span)[::_FRAC].copy()


@lru_cache(maxsize=8)
def _timing_bank(syncword: int, bt: float, span: int):
    """(lag grid, run-A bank, run-B bank): references for every
    fractional lag d/_FRAC, d in [-_SEARCH.._SEARCH] * _FRAC."""
    fine = _fine_sync_burst(syncword, bt, span)
    d = np.arange(-int(_SEARCH * _FRAC), int(_SEARCH * _FRAC) + 1)
    banks = []
    for run in (TIMING_RUN_A, TIMING_RUN_B):
        j = np.concatenate([[2 * s, 2 * s + 1] for s in run])
        idx = j[None, :] * _FRAC - d[:, None]
        banks.append((np.conj(fine[idx]), j))
    return d / _FRAC, banks


def estimate_timing(seg: np.ndarray, syncword: int,
                    gmsk: GmskParams) -> tuple[float, float]:
    """Fractional burst-start offset within ``seg``.

    ``seg`` holds >= 64 samples at 2 samples/symbol whose sample 0 is the
    nominal syncword start.  Returns (tau, peak) where tau (output
    samples, ~[-2, 2]) is the offset of the true start and peak is the
    noncoherent correlation power at the maximum.
    """
    if seg.size < 2 * SYNCWORD_SYMBOLS:
        raise ValueError("need the full syncword window")
    lags, banks = _timing_bank(syncword, gmsk.bt, gmsk.span)
    stat = 0.0
    for bank, j in banks:
        stat = stat + np.abs(bank @ seg[j]) ** 2
    i = int(np.argmax(stat))
    tau = lags[i]
    if 0 < i < lags.size - 1:
        s0, s1, s2 = stat[i - 1], stat[i], stat[i + 1]
        denom = s0 - 2 * s1 + s2
        if denom < 0:
            tau = tau + 0.5 * (s0 - s2) / denom / _FRAC
    return float(tau), float(stat[i])


def estimate_fine_cfo(seg: np.ndarray, ref: np.ndarray, sample_rate: float,
                      max_hz: float = 40.0, pad: int = 16) -> float:
    """Residual CFO of ``seg`` against reference ``ref`` (same length),
    from the zero-padded FFT of the wiped product, parabolically refined."""
    z = seg[: ref.size] * np.conj(ref)
    n = ref.size * pad
    spec = np.abs(np.fft.fft(z, n)) ** 2
    freqs = np.fft.fftfreq(n, 1.0 / sample_rate)
    ok = np.abs(freqs) <= max_hz
    cand = np.nonzero(ok)[0]
    i = cand[np.argmax(spec[cand])]
    f = freqs[i]
    s0, s1, s2 = spec[i - 1], spec[i], spec[(i + 1) % n]
    denom = s0 - 2 * s1 + s2
    if denom < 0:
        f = f + 0.5 * (s0 - s2) / denom * sample_rate / n
    return float(f)


def estimate_phase(seg: np.ndarray, ref: np.ndarray) -> float:
    """Matched-filter carrier phase of ``seg`` relative to ``ref``."""
    return float(np.angle(np.sum(seg[: ref.size] * np.conj(ref))))


def extract_segment(stream: np.ndarray, start: int,
                    length: int) -> np.ndarray:
    """Segment [start, start+length) of ``stream``, zero-padded where it
    runs off either end."""
    seg = np.zeros(length, dtype=complex)
    lo = max(start, 0)
    hi = min(start + length, stream.size)
    if hi > lo:
        seg[lo - start: hi - start] = stream[lo:hi]
    return seg


def align_fractional(x: np.ndarray, tau: float) -> np.ndarray:
    """Advance ``x`` by ``tau`` samples (sample k reads x at k + tau).

    Implemented as a spectral phase ramp: exact for streams bandlimited
    below Nyquist (the channelized 2 samples/symbol outputs are), up to
    circular wraparound at the segment edges, which callers absorb in
    their guard samples.
    """
    if tau == 0.0:
        return x.copy()
    ramp = np.exp(2j * np.pi * np.fft.fftfreq(x.size) * tau)
    return np.fft.ifft(np.fft.fft(x) * ramp)
