"""Monte-Carlo reproducibility harness: PER and timing-error sweeps.

A sweep is a Cartesian grid over Es/No and the channel-impairment value
sets (timing offset, clock drift, carrier offset, Doppler rate,
interference ratio, coding rate).  Each grid point simulates a number of
independent packets through the full transmit - impair - channelize -
receive chain and reports a packet error rate row.

Determinism: every trial derives its random state from
SeedSequence([seed, point_index, trial_index]), so results do not depend
on execution order or the worker count, and a finished CSV is exactly
reproducible from (spec, seed) — apart from the wall_time column, which
records real elapsed seconds.  Sweeps resume by grid point: rows already
present in the output file are not recomputed.

The worker count comes from the LRFHSS_WORKERS environment variable
(default 1); trials are sharded across workers within each point.
"""

from __future__ import annotations

import csv
import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from .channel import apply_profile
from .channelizer import channelize
from .config import (
    ChannelizerConfig,
    CodingRate,
    GmskParams,
    ImpairmentProfile,
    PacketConfig,
)
from .detect import detect_headers
from .receiver import receive_packets
from .sync import estimate_timing
from .txwave import make_packet_signal

CSV_FIELDS = [
    "esno_db", "coding_rate", "payload_len", "sto_symbols", "sfo_ppm",
    "cfo_frac", "doppler_hz_s", "cci_ratio", "packets_sent",
    "packets_failed", "per", "wall_time_s",
]

TIMING_CSV_FIELDS = [
    "esno_db", "doppler_hz_s", "sto_symbols", "trials", "detected",
    "timing_std_symbols", "wall_time_s",
]


@dataclass
class SweepSpec:
    """Axes and bookkeeping of one PER sweep (defaults: a clean-channel
    Es/No sweep at the longest-coded rate)."""

    esno_db: list[float] = field(default_factory=lambda: [4.0])
    coding_rate: list[str] = field(default_factory=lambda: ["1/3"])
    sto_symbols: list[float] = field(default_factory=lambda: [0.0])
    sfo_ppm: list[float] = field(default_factory=lambda: [0.0])
    cfo_frac: list[float] = field(default_factory=lambda: [0.0])
    doppler_hz_s: list[float] = field(default_factory=lambda: [0.0])
    cci_ratio: list[float] = field(default_factory=lambda: [0.0])
    payload_len: int = 10
    packets_per_point: int = 1000
    seed: int = 0
    out_path: str = "sweep.csv"

    def points(self) -> list[dict]:
        """Grid points in deterministic enumeration order."""
        axes = [
            ("esno_db", self.esno_db),
            ("coding_rate", self.coding_rate),
            ("sto_symbols", self.sto_symbols),
            ("sfo_ppm", self.sfo_ppm),
            ("cfo_frac", self.cfo_frac),
            ("doppler_hz_s", self.doppler_hz_s),
            ("cci_ratio", self.cci_ratio),
        ]
        out = []
        for combo in itertools.product(*(v for _, v in axes)):
            out.append(dict(zip((k for k, _ in axes), combo)))
        return out


def load_config_dict(path: str, depth: int = 0) -> dict:
    """Merged key-value mapping of one YAML config; an ``include`` key
    names a base file whose settings the current file overrides."""
    if depth > 8:
        raise ValueError(f"{path}: include chain too deep")
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ValueError(f"{path}: malformed config: {e}") from e
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    if "include" in data:
        base = load_config_dict(
            os.path.join(os.path.dirname(path), data.pop("include")),
            depth + 1,
        )
        base.update(data)
        data = base
    return data


def load_sweep_spec(path: str) -> SweepSpec:
    """Parse a YAML sweep spec (see :func:`load_config_dict`)."""
    data = load_config_dict(path)
    known = {f.name for f in fields(SweepSpec)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("esno_db", "coding_rate", "sto_symbols", "sfo_ppm",
                "cfo_frac", "doppler_hz_s", "cci_ratio"):
        if key in data and not isinstance(data[key], list):
            data[key] = [data[key]]
    spec = SweepSpec(**data)
    for rate in spec.coding_rate:
        CodingRate.parse(str(rate))
    for v in spec.cfo_frac:
        if not 0.0 <= abs(v) <= 1.0:
            raise ValueError(f"{path}: cfo_frac {v} outside [-1, 1]")
    for v in spec.cci_ratio:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{path}: cci_ratio {v} outside [0, 1]")
    return spec


def simulate_packet(
    point: dict,
    payload_len: int,
    entropy: list[int],
    chcfg: ChannelizerConfig | None = None,
) -> bool:
    """One packet through the full chain; True when it decodes clean.

    ``entropy`` seeds every random choice of the trial (payload bytes,
    hopping seed, carrier phase, noise, interference) through one
    SeedSequence, making the trial a pure function of its arguments.
    """
    chcfg = chcfg or ChannelizerConfig()
    ss = np.random.SeedSequence(entropy=entropy)
    s_data, s_chan = ss.spawn(2)
    rng = np.random.default_rng(s_data)

    rate = point["coding_rate"]
    if not isinstance(rate, CodingRate):
        rate = CodingRate.parse(str(rate))
    cfg = PacketConfig(
        coding_rate=rate,
        payload_len=max(payload_len, 1),
        hop_seed=int(rng.integers(0, 2**11)),
    )
    payload = rng.bytes(payload_len)
    profile = ImpairmentProfile(
        esno_db=float(point["esno_db"]),
        cfo_hz=float(point["cfo_frac"]) * cfg.symbol_rate,
        phase_rad=float(rng.uniform(0.0, 2.0 * np.pi)),
        sfo_ppm=float(point["sfo_ppm"]),
        sto_symbols=float(point["sto_symbols"]),
        doppler_rate_hz_s=float(point["doppler_hz_s"]),
        cci_ratio=float(point["cci_ratio"]),
    )

    sig = make_packet_signal(cfg, payload, chcfg.sample_rate)
    rx = apply_profile(
        sig, profile, seed=int(s_chan.generate_state(1, np.uint64)[0])
    )
    chs = channelize(rx, chcfg)
    pkts = receive_packets(chs, cfg, expect_packets=1)
    return any(
        p.crc_ok
        and p.payload == payload
        and p.info.hop_seed == cfg.hop_seed
        for p in pkts
    )


def _trial_batch(args) -> int:
    point, payload_len, seed, point_index, trials = args
    failed = 0
    for t in trials:
        ok = simulate_packet(point, payload_len, [seed, point_index, t])
        failed += not ok
    return failed


def _workers() -> int:
    return max(1, int(os.environ.get("LRFHSS_WORKERS", "1")))


def run_point(
    point: dict,
    payload_len: int,
    n_packets: int,
    seed: int,
    point_index: int,
) -> tuple[int, int]:
    """(packets_failed, packets_sent) for one grid point."""
    n_workers = _workers()
    trial_ids = list(range(n_packets))
    if n_workers == 1:
        failed = _trial_batch(
            (point, payload_len, seed, point_index, trial_ids)
        )
    else:
        shards = [
            (point, payload_len, seed, point_index, trial_ids[w::n_workers])
            for w in range(n_workers)
        ]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            failed = sum(pool.map(_trial_batch, shards))
    return failed, n_packets


def _completed_points(path: str) -> set[tuple]:
    done = set()
    if not os.path.exists(path):
        return done
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            done.add(tuple(
                row[k] for k in CSV_FIELDS[:8]
            ))
    return done


def _point_key(point: dict, payload_len: int) -> tuple:
    vals = dict(point, payload_len=payload_len)
    return tuple(_format_value(k, vals[k]) for k in CSV_FIELDS[:8])


def _format_value(key: str, value) -> str:
    if key == "coding_rate":
        return value.value if isinstance(value, CodingRate) else str(value)
    if key in ("payload_len", "packets_sent", "packets_failed"):
        return str(int(value))
    return repr(float(value))


def run_per_sweep(spec: SweepSpec, progress=None) -> list[dict]:
    """Run (or resume) a PER sweep, appending one CSV row per point.

    Returns all rows computed in this invocation.
    """
    done = _completed_points(spec.out_path)
    new_file = not os.path.exists(spec.out_path)
    rows = []
    with open(spec.out_path, "a", newline="") as f:
        writer = csv.writer(f)
        if new_file:
            writer.writerow(CSV_FIELDS)
            f.flush()
        for index, point in enumerate(spec.points()):
            key = _point_key(point, spec.payload_len)
            if key in done:
                continue
            t0 = time.monotonic()
            failed, sent = run_point(
                point, spec.payload_len, spec.packets_per_point,
                spec.seed, index,
            )
            wall = time.monotonic() - t0
            row = dict(
                point,
                payload_len=spec.payload_len,
                packets_sent=sent,
                packets_failed=failed,
                per=failed / sent,
                wall_time_s=round(wall, 3),
            )
            writer.writerow(
                [_format_value(k, row[k]) if k in row else row[k]
                 for k in CSV_FIELDS[:8]]
                + [sent, failed, repr(failed / sent), round(wall, 3)]
            )
            f.flush()
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


def timing_trial(
    esno_db: float,
    doppler_hz_s: float,
    sto_symbols: float,
    entropy: list[int],
    chcfg: ChannelizerConfig | None = None,
) -> float | None:
    """Symbol-timing error (in symbols) of the first detected header
    replica of one packet, or None when detection misses."""
    chcfg = chcfg or ChannelizerConfig()
    ss = np.random.SeedSequence(entropy=entropy)
    s_data, s_chan = ss.spawn(2)
    rng = np.random.default_rng(s_data)

    cfg = PacketConfig(
        coding_rate=CodingRate.R1_3,
        payload_len=10,
        hop_seed=int(rng.integers(0, 2**11)),
    )
    profile = ImpairmentProfile(
        esno_db=esno_db,
        phase_rad=float(rng.uniform(0.0, 2.0 * np.pi)),
        sto_symbols=sto_symbols,
        doppler_rate_hz_s=doppler_hz_s,
    )
    gmsk = GmskParams()
    sig = make_packet_signal(cfg, rng.bytes(10), chcfg.sample_rate)
    rx = apply_profile(
        sig, profile, seed=int(s_chan.generate_state(1, np.uint64)[0])
    )
    chs = channelize(rx, chcfg)

    dets = [d for d in detect_headers(chs, cfg, gmsk) if d.lag < 100]
    if not dets:
        return None
    det = max(dets, key=lambda d: d.stat)
    stream = chs.bin_stream(det.bin_index)
    n = np.arange(det.lag, det.lag + 228)
    seg = stream[det.lag: det.lag + 228] * np.exp(
        -2j * np.pi * det.cfo_hz * n / chcfg.output_rate
    )
    tau, _ = estimate_timing(seg, cfg.syncword, gmsk)
    est_start = det.lag + tau
    true_start = -2.0 * sto_symbols  # replica 0 sits at output sample 0
    return float((est_start - true_start) / 2.0)


def run_timing_study(
    esno_db: list[float],
    doppler_hz_s: list[float],
    trials: int,
    seed: int,
    sto_symbols: float = 0.125,
    progress=None,
) -> list[dict]:
    """Timing-estimator standard deviation per (Es/No, Doppler rate)."""
    rows = []
    for index, (rho, esno) in enumerate(
        itertools.product(doppler_hz_s, esno_db)
    ):
        t0 = time.monotonic()
        errs = []
        for t in range(trials):
            e = timing_trial(esno, rho, sto_symbols, [seed, index, t])
            if e is not None:
                errs.append(e)
        rows.append({
            "esno_db": esno,
            "doppler_hz_s": rho,
            "sto_symbols": sto_symbols,
            "trials": trials,
            "detected": len(errs),
            "timing_std_symbols": float(np.std(errs)) if errs else
            float("nan"),
            "wall_time_s": round(time.monotonic() - t0, 3),
        })
        if progress is not None:
            progress(rows[-1])
    return rows
