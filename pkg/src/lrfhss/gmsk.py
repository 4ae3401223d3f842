"""GMSK modulation and the shared phase-pulse model.

The phase pulse q(t) integrates a Gaussian-filtered rectangular frequency
pulse; it rises monotonically from 0 to exactly 90 degrees over ``span``
symbol periods.  Transmitter, receiver references and trellis constants
all sample the same internally cached fine-grid pulse, so they are
bit-exactly consistent at any oversampling ratio that divides the grid.

Sample n of a modulated block corresponds to time n/osr symbol periods
after the start of the first symbol's pulse; the phase there is
sum_i a_i q(n/osr - i) with a_i = +/-1.

The sequence detector models each received sample with the two most
recent symbols only.  Sampling at the centre of symbol k's pulse
(1.5 symbols after its start) gives contribution q0 = 45 degrees from
a_k, q1 = q(2.5 Ts) from a_{k-1}, a fully settled 90 degrees from each
earlier symbol, and a negligible early contribution (< 1e-3 degrees at
BT = 1) from a_{k+1}.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special

from .config import GmskParams

_FINE_OSR = 1024  # internal pulse grid, samples per symbol


@lru_cache(maxsize=8)
def _fine_pulse(bt: float, span: int) -> np.ndarray:
    """q(t) on the fine grid: span*_FINE_OSR + 1 points, 0 .. pi/2."""
    t = np.arange(span * _FINE_OSR + 1) / _FINE_OSR - span / 2.0
    alpha = 2.0 * np.pi * bt / np.sqrt(np.log(2.0))

    def q_func(x):  # Gaussian tail probability
        return 0.5 * special.erfc(x / np.sqrt(2.0))

    g = q_func(alpha * (t - 0.5)) - q_func(alpha * (t + 0.5))
    q = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]))])
    q *= (np.pi / 2.0) / q[-1]
    return q


def phase_pulse(params: GmskParams, osr: int) -> np.ndarray:
    """q sampled at ``osr`` points per symbol (length span*osr + 1)."""
    if _FINE_OSR % osr:
        raise ValueError(f"osr must divide {_FINE_OSR}")
    q = _fine_pulse(params.bt, params.span)
    return q[:: _FINE_OSR // osr].copy()


def trellis_taps(params: GmskParams) -> tuple[float, float]:
    """(q0, q1): phase weights of the newest two symbols at the
    mid-pulse sampling instant used by the sequence detector."""
    q = _fine_pulse(params.bt, params.span)
    q0 = float(q[3 * _FINE_OSR // 2])
    q1 = float(q[5 * _FINE_OSR // 2])
    return q0, q1


def boundary_taps(params: GmskParams) -> tuple[float, float]:
    """(p0, p1): phase weights of the newest two symbols at the symbol
    boundary sample half a period before each trellis instant.  The
    boundary phase is exactly p0*a_k + p1*a_{k-1} + pi/2 * older sum
    for span-3 pulses; pulse symmetry gives p0 + p1 = pi/2."""
    q = _fine_pulse(params.bt, params.span)
    p0 = float(q[_FINE_OSR])
    p1 = float(q[2 * _FINE_OSR])
    return p0, p1


def trellis_sample_offset(osr: int) -> int:
    """Sample offset of symbol k's trellis instant from k*osr."""
    if (3 * osr) % 2:
        raise ValueError("osr must be even for mid-pulse sampling")
    return 3 * osr // 2


def gmsk_phase(bits, params: GmskParams, osr: int | None = None) -> np.ndarray:
    """Transmitted phase trajectory, one value per output sample."""
    osr = params.osr if osr is None else osr
    bits = np.asarray(bits, dtype=np.int8)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("bits must be a non-empty 1-D array")
    symbols = 2.0 * bits - 1.0
    q = phase_pulse(params, osr)
    g = np.diff(q)  # per-sample phase increments of one pulse
    up = np.zeros(bits.size * osr)
    up[::osr] = symbols
    incr = np.convolve(up, g)[: bits.size * osr - 1]
    return np.concatenate([[0.0], np.cumsum(incr)])


def gmsk_modulate(bits, params: GmskParams,
                  osr: int | None = None) -> np.ndarray:
    """Unit-envelope GMSK block of exactly len(bits)*osr complex samples."""
    return np.exp(1j * gmsk_phase(bits, params, osr))


def reference_samples(bits, params: GmskParams, osr: int = 2) -> np.ndarray:
    """Noiseless modulated samples for a known bit pattern (receiver
    references: syncword correlators, matched filters)."""
    return gmsk_modulate(bits, params, osr)
