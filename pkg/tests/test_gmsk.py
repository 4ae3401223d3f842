"""GMSK modulator tests: pulse shape, phase trajectory, envelope."""

import numpy as np
import pytest

from lrfhss.config import GmskParams
from lrfhss.gmsk import (
    gmsk_modulate,
    gmsk_phase,
    phase_pulse,
    reference_samples,
    trellis_sample_offset,
    trellis_taps,
)

PARAMS = GmskParams(symbol_rate=488.28125, bt=1.0, span=3, osr=8)


def test_phase_pulse_shape():
    q = phase_pulse(PARAMS, osr=8)
    assert q.size == PARAMS.span * 8 + 1
    assert q[0] == 0.0
    assert q[-1] == np.pi / 2  # exact by normalization
    assert np.all(np.diff(q) >= 0.0)
    # symmetric about the midpoint: q(t) + q(3T - t) = pi/2
    assert np.allclose(q + q[::-1], np.pi / 2, atol=1e-12)


def test_trellis_taps_values():
    q0, q1 = trellis_taps(PARAMS)
    # mid-pulse sample is pi/4 by symmetry of the phase pulse
    assert q0 == pytest.approx(np.pi / 4, abs=1e-12)
    # one symbol later the pulse has nearly saturated
    assert np.pi / 4 < q1 <= np.pi / 2
    assert np.pi / 2 - q1 < 1e-3
    # neglected outer taps: q(0.5 T) and pi/2 - q(3.5 T -> saturated)
    q = phase_pulse(PARAMS, osr=8)
    assert q[4] < 1e-3  # q(0.5 T): contribution of the next symbol


def test_trellis_sample_offset():
    assert trellis_sample_offset(8) == 12
    assert trellis_sample_offset(2) == 3


def test_unit_envelope():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 200)
    env = np.abs(gmsk_modulate(bits, PARAMS, osr=8))
    assert np.max(np.abs(env - 1.0)) < 1e-12


def test_sample_count():
    bits = np.zeros(57, dtype=np.int64)
    assert gmsk_modulate(bits, PARAMS, osr=8).size == 57 * 8
    assert gmsk_modulate(bits, PARAMS, osr=2).size == 57 * 2


def test_all_ones_quarter_turn_per_symbol():
    """A run of ones advances the carrier phase by +pi/2 per symbol once
    the pulse overlap has settled; a run of zeros retards it."""
    osr = 8
    n = 40
    ph = gmsk_phase(np.ones(n, dtype=np.int64), PARAMS, osr)
    settled = ph[PARAMS.span * osr : (n - PARAMS.span) * osr]
    steps = settled[osr:] - settled[:-osr]
    assert np.allclose(steps, np.pi / 2, atol=1e-9)
    ph0 = gmsk_phase(np.zeros(n, dtype=np.int64), PARAMS, osr)
    settled0 = ph0[PARAMS.span * osr : (n - PARAMS.span) * osr]
    assert np.allclose(settled0[osr:] - settled0[:-osr], -np.pi / 2,
                       atol=1e-9)


def test_phase_superposition():
    """gmsk_phase is affine in the bipolar symbols: the sum of the
    trajectories for a bit sequence and its complement is constant."""
    rng = np.random.default_rng(1)
    bits = rng.integers(0, 2, 64)
    ph = gmsk_phase(bits, PARAMS, osr=4)
    ph_c = gmsk_phase(1 - bits, PARAMS, osr=4)
    assert np.allclose(ph + ph_c, 0.0, atol=1e-9)


def test_phase_matches_direct_sum():
    """phase[n] equals the direct evaluation sum_i a_i q(nTs/osr - iTs)."""
    rng = np.random.default_rng(2)
    bits = rng.integers(0, 2, 24)
    a = 2 * bits - 1
    osr = 4
    q = phase_pulse(PARAMS, osr)
    n_samp = bits.size * osr
    direct = np.zeros(n_samp)
    for i, ai in enumerate(a):
        idx = np.arange(n_samp) - i * osr
        contrib = np.where(
            idx <= 0, 0.0,
            np.where(idx >= q.size - 1, np.pi / 2, q[np.clip(idx, 0, q.size - 1)]),
        )
        direct += ai * contrib
    ph = gmsk_phase(bits, PARAMS, osr)
    assert np.allclose(ph, direct, atol=1e-9)


def test_occupied_bandwidth():
    """99% power bandwidth of a random burst stays within ~1.2 symbol
    rates (narrowband enough for 488 Hz channel spacing)."""
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, 4096)
    osr = 8
    x = gmsk_modulate(bits, PARAMS, osr)
    # Welch-style average periodogram
    seg = 1024
    nseg = x.size // seg
    psd = np.zeros(seg)
    win = np.hanning(seg)
    for k in range(nseg):
        s = x[k * seg : (k + 1) * seg] * win
        psd += np.abs(np.fft.fft(s)) ** 2
    psd = np.fft.fftshift(psd)
    freqs = np.fft.fftshift(np.fft.fftfreq(seg, 1.0 / (osr * PARAMS.symbol_rate)))
    csum = np.cumsum(psd) / psd.sum()
    lo = freqs[np.searchsorted(csum, 0.005)]
    hi = freqs[np.searchsorted(csum, 0.995)]
    assert hi - lo < 1.2 * PARAMS.symbol_rate


def test_reference_samples_match_modulator():
    bits = np.array([1, 0, 1, 1, 0, 0, 1, 0])
    ref = reference_samples(bits, PARAMS, osr=2)
    full = gmsk_modulate(bits, PARAMS, osr=2)
    assert np.allclose(ref, full)
