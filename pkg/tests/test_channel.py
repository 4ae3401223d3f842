"""Channel impairment tests with closed-form and FFT-based oracles."""

import numpy as np
import pytest

from lrfhss.channel import (
    apply_awgn,
    apply_cfo_phase,
    apply_doppler,
    apply_profile,
    apply_sfo,
    farrow_resample,
    inject_cci,
)
from lrfhss.config import (
    HEADER_SYMBOLS,
    SYMBOL_RATE,
    CodingRate,
    ImpairmentProfile,
    PacketConfig,
)
from lrfhss.iqbuf import IqBuffer
from lrfhss.txwave import make_packet_signal

FS = 8 * SYMBOL_RATE
OSR = 8


def cw(n, fs=FS, t0=0.0):
    return IqBuffer(np.ones(n, dtype=np.complex128), fs, t0)


def test_doppler_quadratic_phase():
    n = 4000
    rate = 400.0
    out = apply_doppler(cw(n), rate)
    t = np.arange(n) / FS
    expected = np.pi * rate * t * t
    phase = np.unwrap(np.angle(out.samples))
    assert np.max(np.abs(phase - expected)) < 1e-9
    # t0 offsets shift the time reference
    out2 = apply_doppler(cw(n, t0=0.5), rate)
    t2 = 0.5 + t
    assert np.allclose(np.unwrap(np.angle(out2.samples)),
                       np.pi * rate * t2 * t2 - np.pi * rate * 0.25,
                       atol=1e-6)


def test_doppler_header_excursion_magnitude():
    """At 400 Hz/s the quadratic residual over one header, referenced to
    the header midpoint, reaches roughly a thousand degrees of phase -
    far beyond what a linear-only frequency estimator can absorb."""
    t_header = HEADER_SYMBOLS / SYMBOL_RATE
    residual = np.pi * 400.0 * (t_header / 2.0) ** 2
    assert 900.0 < np.degrees(residual) < 1100.0


def test_cfo_and_phase():
    n = 1000
    out = apply_cfo_phase(cw(n), cfo_hz=123.0, phase_rad=0.7)
    t = np.arange(n) / FS
    expected = np.exp(1j * (2 * np.pi * 123.0 * t + 0.7))
    assert np.allclose(out.samples, expected, atol=1e-12)


def bandlimited_noise(n, cutoff, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    spec = np.fft.fft(x)
    f = np.fft.fftfreq(n)
    spec[np.abs(f) > cutoff] = 0.0
    return np.fft.ifft(spec)


def fft_shift_oracle(x, d):
    """x advanced by d samples via the DFT shift theorem (periodic)."""
    f = np.fft.fftfreq(x.size)
    return np.fft.ifft(np.fft.fft(x) * np.exp(2j * np.pi * f * d))


@pytest.mark.parametrize("sto,osr", [(0.3, 8), (0.25, 2), (-0.4, 8)])
def test_sto_against_fft_shift(sto, osr):
    x = bandlimited_noise(4096, 0.075, seed=4)
    out = apply_sfo(IqBuffer(x, FS), sfo_ppm=0.0, sto_symbols=sto, osr=osr)
    oracle = fft_shift_oracle(x, sto * osr)
    mid = slice(100, 3996)
    err = np.linalg.norm(out.samples[mid] - oracle[mid])
    assert err / np.linalg.norm(oracle[mid]) < 1e-3


def test_farrow_fourth_order_convergence():
    """Halving the signal bandwidth cuts the interpolation error by
    ~2^4, the signature of a correct cubic kernel."""
    errs = []
    for cutoff in (0.15, 0.075, 0.0375):
        x = bandlimited_noise(4096, cutoff, seed=4)
        out = apply_sfo(IqBuffer(x, FS), 0.0, 0.3, 8)
        oracle = fft_shift_oracle(x, 2.4)
        mid = slice(100, 3996)
        errs.append(np.linalg.norm(out.samples[mid] - oracle[mid])
                    / np.linalg.norm(oracle[mid]))
    for a, b in zip(errs, errs[1:]):
        assert 10.0 < a / b < 24.0


def test_sfo_scales_tone_frequency():
    """A 66 ppm sampling error reads the input fast by the same ratio,
    so a tone's measured phase step grows by the ratio (and the packet
    tail drifts ~0.18 symbol over a 2714-symbol packet)."""
    n = 100_000
    nu = 0.1  # cycles per sample
    x = np.exp(2j * np.pi * nu * np.arange(n))
    out = apply_sfo(IqBuffer(x, FS), sfo_ppm=66.0, sto_symbols=0.0, osr=OSR)
    seg = out.samples[100:-100]
    step = np.angle(np.sum(seg[1:] * np.conj(seg[:-1])))
    measured_ppm = (step / (2 * np.pi * nu) - 1.0) * 1e6
    assert measured_ppm == pytest.approx(66.0, abs=2.0)
    drift = 2714 * 66e-6  # symbols of timing slip across a long packet
    assert drift == pytest.approx(0.179, abs=0.001)


def test_farrow_exact_on_integers_and_cubics():
    x = np.arange(20, dtype=np.float64) ** 3 + 0j
    pos = np.array([4.0, 7.25, 10.5, 13.75])
    out = farrow_resample(x, pos)
    assert np.allclose(out.real, pos**3, rtol=1e-12)
    out_edge = farrow_resample(x, np.array([-1.0, 0.5, 18.5, 25.0]))
    assert out_edge[0] == 0.0 and out_edge[3] == 0.0  # outside support


def make_signal(seed=3):
    cfg = PacketConfig(coding_rate=CodingRate.R1_3, payload_len=32,
                       hop_seed=seed)
    return make_packet_signal(cfg, bytes(32), FS), cfg


def test_cci_zero_ratio_is_identity():
    sig, cfg = make_signal()
    out = inject_cci(sig.iq, sig.placements, cfg, ratio=0.0, seed=1)
    assert np.array_equal(out.samples, sig.iq.samples)
    # ratios that round to zero blocks also leave the signal alone
    out2 = inject_cci(sig.iq, sig.placements, cfg, ratio=0.02, seed=1)
    assert np.array_equal(out2.samples, sig.iq.samples)


def test_cci_hits_requested_fraction():
    sig, cfg = make_signal()
    n_blocks = len(sig.placements)
    assert n_blocks == 21
    out = inject_cci(sig.iq, sig.placements, cfg, ratio=0.6, seed=2)
    added = out.samples - sig.iq.samples
    energy = np.sum(np.abs(added) ** 2)
    # 13 equal-power bursts of 50..114 symbols, possibly clipped at the
    # packet edges, give a bounded total interference energy
    n_hit = round(0.6 * n_blocks)
    assert n_hit == 13
    assert 0.45 * n_hit * 50 * OSR < energy < 1.2 * n_hit * 114 * OSR


def test_cci_full_ratio_touches_every_block():
    sig, cfg = make_signal()
    out = inject_cci(sig.iq, sig.placements, cfg, ratio=1.0, seed=5)
    added = np.abs(out.samples - sig.iq.samples)
    for p in sig.placements:
        blk = added[p.start_sample : p.start_sample + p.n_symbols * OSR]
        assert np.max(blk) > 0.5  # an equal-power burst overlaps it


def test_cci_deterministic():
    sig, cfg = make_signal()
    a = inject_cci(sig.iq, sig.placements, cfg, ratio=0.5, seed=9)
    b = inject_cci(sig.iq, sig.placements, cfg, ratio=0.5, seed=9)
    c = inject_cci(sig.iq, sig.placements, cfg, ratio=0.5, seed=10)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_awgn_calibration():
    """Measured per-sample noise variance matches osr / EsNo_lin within
    1% (0.05 dB) on a long record."""
    n = 200_000
    buf = cw(n)
    out = apply_awgn(buf, esno_db=7.0, osr=OSR, seed=11)
    var = np.mean(np.abs(out.samples - buf.samples) ** 2)
    expected = OSR / 10 ** 0.7
    assert var == pytest.approx(expected, rel=0.01)
    esno_est = 10 * np.log10(OSR / var)
    assert esno_est == pytest.approx(7.0, abs=0.05)


def test_awgn_deterministic():
    buf = cw(1000)
    a = apply_awgn(buf, 5.0, OSR, seed=3)
    b = apply_awgn(buf, 5.0, OSR, seed=3)
    assert np.array_equal(a.samples, b.samples)


def test_profile_identity_when_clean():
    sig, _ = make_signal()
    out = apply_profile(sig, ImpairmentProfile(), seed=0)
    assert np.array_equal(out.samples, sig.iq.samples)


def test_profile_full_chain_runs_and_is_deterministic():
    sig, _ = make_signal()
    prof = ImpairmentProfile(esno_db=8.0, cfo_hz=200.0, phase_rad=1.0,
                             sfo_ppm=40.0, sto_symbols=0.3,
                             doppler_rate_hz_s=200.0, cci_ratio=0.2)
    a = apply_profile(sig, prof, seed=77)
    b = apply_profile(sig, prof, seed=77)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, sig.iq.samples)
    assert len(a) == len(sig.iq)
