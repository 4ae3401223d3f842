"""Detector tests: false alarms, sensitivity, lag/CFO accuracy, dedupe."""

import numpy as np
import pytest

from lrfhss.channel import apply_awgn, apply_cfo_phase
from lrfhss.channelizer import channelize
from lrfhss.config import (
    SYMBOL_RATE,
    ChannelizerConfig,
    CodingRate,
    PacketConfig,
)
from lrfhss.detect import DEFAULT_THRESHOLD, detect_headers
from lrfhss.iqbuf import IqBuffer
from lrfhss.txwave import make_packet_signal

CCFG = ChannelizerConfig()
FS = CCFG.sample_rate
PCFG = PacketConfig(coding_rate=CodingRate.R1_3, payload_len=8, hop_seed=5)


@pytest.fixture(scope="module")
def packet():
    sig = make_packet_signal(PCFG, bytes(8), FS)
    headers = [(p.start_sample // CCFG.hop_samples, p.channel)
               for p in sig.placements if p.kind == "header"]
    return sig, headers


def test_noiseless_detection_exact(packet):
    sig, headers = packet
    dets = detect_headers(channelize(sig.iq, CCFG), PCFG)
    for lag, chan in headers:
        match = [d for d in dets
                 if abs(d.lag - lag) <= 2 and abs(d.channel - chan) <= 1]
        assert len(match) == 1, f"header at lag {lag} missing or duplicated"
        d = match[0]
        assert d.channel == chan
        assert abs(d.cfo_hz) <= CCFG.coarse_cfo_step_hz
        assert d.stat > 0.9


def test_dedupe_and_ranking(packet):
    """Each header yields exactly one detection; random-data windows may
    also cross the threshold (their syncword correlation peaks near 0.4
    noiseless) but always rank strictly below the real syncword hits, so
    a stat-ordered decode tries the true headers first."""
    sig, headers = packet
    dets = detect_headers(channelize(sig.iq, CCFG), PCFG)
    true_stats, side_stats = [], []
    for d in dets:
        if any(abs(d.lag - lag) <= 2 and abs(d.channel - chan) <= 1
               for lag, chan in headers):
            true_stats.append(d.stat)
        else:
            side_stats.append(d.stat)
    assert len(true_stats) == len(headers)
    assert min(true_stats) > 0.9
    assert len(side_stats) < 40
    if side_stats:
        assert max(side_stats) < min(true_stats)
    assert [d.stat for d in dets] == sorted((d.stat for d in dets),
                                            reverse=True)


def test_detection_with_noise_at_5db(packet):
    sig, headers = packet
    found = 0
    for tr in range(15):
        buf = apply_awgn(sig.iq, 5.0, 128, seed=300 + tr)
        dets = detect_headers(channelize(buf, CCFG), PCFG)
        for lag, chan in headers:
            if any(abs(d.lag - lag) <= 2 and abs(d.channel - chan) <= 1
                   for d in dets):
                found += 1
    assert found == 15 * len(headers)


def test_detection_with_noise_at_2db(packet):
    sig, headers = packet
    found = total = 0
    for tr in range(15):
        buf = apply_awgn(sig.iq, 2.0, 128, seed=600 + tr)
        dets = detect_headers(channelize(buf, CCFG), PCFG)
        for lag, chan in headers:
            total += 1
            if any(abs(d.lag - lag) <= 2 and abs(d.channel - chan) <= 1
                   for d in dets):
                found += 1
    assert found / total > 0.9


def test_large_cfo_resolved_through_adjacent_bin(packet):
    """A CFO of 5/6 of the symbol rate pushes the burst into the next
    bin; the absolute frequency (bin centre + coarse CFO) is still
    recovered to within one coarse step."""
    sig, headers = packet
    cfo = 5.0 / 6.0 * SYMBOL_RATE
    buf = apply_cfo_phase(sig.iq, cfo, 0.4)
    dets = detect_headers(channelize(buf, CCFG), PCFG)
    for lag, chan in headers:
        match = [d for d in dets if abs(d.lag - lag) <= 2]
        assert match
        d = max(match, key=lambda d: d.stat)
        assert d.channel == chan + 1  # nearest bin is the next channel
        f_abs = CCFG.channel_freq_hz(d.channel) + d.cfo_hz
        f_true = CCFG.channel_freq_hz(chan) + cfo
        assert abs(f_abs - f_true) <= CCFG.coarse_cfo_step_hz


def test_false_alarm_rate_on_noise():
    """At the default threshold the measured false-alarm rate sits far
    below 1e-4 per (bin, lag) opportunity."""
    rng = np.random.default_rng(0)
    alarms = 0
    opportunities = 0
    for _ in range(4):
        x = (rng.normal(size=150_000) + 1j * rng.normal(size=150_000))
        ch = channelize(IqBuffer(x * np.sqrt(0.5), FS), CCFG)
        dets = detect_headers(ch, PCFG, threshold=DEFAULT_THRESHOLD)
        alarms += len(dets)
        opportunities += (ch.n_out - 64) * 80
    assert opportunities > 7e5
    # expected ~0.2 alarms; even 4 keeps the rate under 1e-5
    assert alarms <= 4
    assert alarms / opportunities < 1e-4


def test_empty_and_zero_input():
    z = IqBuffer(np.zeros(20_000, dtype=complex), FS)
    assert detect_headers(channelize(z, CCFG), PCFG) == []
    tiny = IqBuffer(np.zeros(32, dtype=complex), FS)
    assert detect_headers(channelize(tiny, CCFG), PCFG) == []
