"""Command-line front end.

Subcommands mirror the library pipeline: ``tx`` synthesizes a packet
into an IQ file, ``chan`` pushes an IQ file through the channel
impairment model, ``rx`` demodulates an IQ file, ``sweep`` runs a
Monte-Carlo PER grid from a YAML config, ``aloha`` produces multiple-
access throughput curves, and ``timing`` measures the timing-estimator
accuracy.  Every stochastic command requires ``--seed`` so runs are
reproducible; the ``LRFHSS_WORKERS`` environment variable sets the
sweep worker count (default 1) without affecting results.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import aloha as aloha_mod
from . import sweep as sweep_mod
from .channel import apply_profile
from .channelizer import channelize
from .config import (
    ChannelizerConfig,
    CodingRate,
    ImpairmentProfile,
    PacketConfig,
)
from .iqio import read_iq, write_iq
from .receiver import receive_packets
from .txwave import make_packet_signal


def _add_tx(sub) -> None:
    p = sub.add_parser("tx", help="synthesize one packet into an IQ file")
    p.add_argument("--out", required=True, help="output IQ path")
    p.add_argument("--coding-rate", default="1/3",
                   choices=[r.value for r in CodingRate])
    p.add_argument("--payload-hex",
                   help="explicit payload bytes (hex); deterministic")
    p.add_argument("--payload-len", type=int, default=10,
                   help="random payload length when --payload-hex absent")
    p.add_argument("--hop-seed", type=int,
                   help="11-bit hopping seed (default: derived from --seed"
                        " or 0)")
    p.add_argument("--n-header-replicas", type=int, default=3)
    p.add_argument("--sample-rate", type=float, default=62500.0)
    p.add_argument("--seed", type=int,
                   help="required when the payload is random")


def _add_chan(sub) -> None:
    p = sub.add_parser(
        "chan", help="apply channel impairments to an IQ file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--esno-db", type=float, required=True)
    p.add_argument("--cfo-hz", type=float, default=0.0)
    p.add_argument("--phase-rad", type=float, default=0.0)
    p.add_argument("--sto-symbols", type=float, default=0.0)
    p.add_argument("--sfo-ppm", type=float, default=0.0)
    p.add_argument("--doppler-hz-s", type=float, default=0.0)
    p.add_argument("--cci-ratio", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True,
                   help="noise / interference seed")


def _add_rx(sub) -> None:
    p = sub.add_parser("rx", help="demodulate packets from an IQ file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--n-header-replicas", type=int, default=3)
    p.add_argument("--threshold", type=float, default=0.26,
                   help="header detection statistic threshold")
    p.add_argument("--expect", type=int,
                   help="stop after decoding this many packets")


def _add_sweep(sub) -> None:
    p = sub.add_parser("sweep", help="run a PER sweep from a YAML config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int,
                   help="overrides the seed key of the config")
    p.add_argument("--out", help="overrides the out_path of the config")
    p.add_argument("--dry-run", action="store_true",
                   help="print the grid without simulating")


def _add_aloha(sub) -> None:
    p = sub.add_parser("aloha", help="multiple-access throughput curve")
    p.add_argument("--mode", required=True,
                   choices=["slotted", "unslotted"])
    p.add_argument("--rule", default="block",
                   choices=["packet", "block"])
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--coding-rate", default="1/3",
                   choices=[r.value for r in CodingRate])
    p.add_argument("--packet-len", type=int, default=20)
    p.add_argument("--g-min", type=float, default=0.1)
    p.add_argument("--g-max", type=float, default=3.0)
    p.add_argument("--g-step", type=float, default=0.1)
    p.add_argument("--packets", type=int, default=20000,
                   help="simulated packets per load point")
    p.add_argument("--any-header", action="store_true",
                   help="block rule: one clean header replica suffices")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")


def _add_timing(sub) -> None:
    p = sub.add_parser(
        "timing", help="timing-estimator error study")
    p.add_argument("--esno-db", type=float, nargs="+", required=True)
    p.add_argument("--doppler-hz-s", type=float, nargs="+",
                   default=[0.0])
    p.add_argument("--sto-symbols", type=float, default=0.125)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="output CSV path (default: stdout only)")


def _cmd_tx(args) -> int:
    rate = CodingRate.parse(args.coding_rate)
    if args.payload_hex is not None:
        payload = bytes.fromhex(args.payload_hex)
        hop_seed = args.hop_seed if args.hop_seed is not None else 0
    else:
        if args.seed is None:
            raise ValueError("--seed is required for a random payload")
        rng = np.random.default_rng(args.seed)
        payload = rng.bytes(args.payload_len)
        hop_seed = args.hop_seed if args.hop_seed is not None \
            else int(rng.integers(0, 2**11))
    cfg = PacketConfig(
        coding_rate=rate, payload_len=len(payload), hop_seed=hop_seed,
        n_header_replicas=args.n_header_replicas,
    )
    sig = make_packet_signal(cfg, payload, args.sample_rate)
    write_iq(args.out, sig.iq)
    print(f"wrote {args.out}: {len(sig.iq)} samples at "
          f"{sig.iq.sample_rate:g} S/s, rate {rate.value}, "
          f"{len(payload)}-byte payload, hop seed {hop_seed}, "
          f"{cfg.fragment_count()} fragments, "
          f"time on air {cfg.time_on_air():.3f} s")
    return 0


def _cmd_chan(args) -> int:
    buf = read_iq(args.inp)
    profile = ImpairmentProfile(
        esno_db=args.esno_db, cfo_hz=args.cfo_hz,
        phase_rad=args.phase_rad, sto_symbols=args.sto_symbols,
        sfo_ppm=args.sfo_ppm, doppler_rate_hz_s=args.doppler_hz_s,
        cci_ratio=args.cci_ratio,
    )
    out = apply_profile(buf, profile, seed=args.seed)
    write_iq(args.out, out)
    print(f"wrote {args.out}: {len(out)} samples, Es/No "
          f"{args.esno_db:g} dB")
    return 0


def _cmd_rx(args) -> int:
    buf = read_iq(args.inp)
    chcfg = ChannelizerConfig()
    if abs(buf.sample_rate - chcfg.sample_rate) > 1e-6:
        raise ValueError(
            f"capture rate {buf.sample_rate:g} S/s does not match the "
            f"channelizer input rate {chcfg.sample_rate:g} S/s"
        )
    cfg = PacketConfig(n_header_replicas=args.n_header_replicas)
    chs = channelize(buf, chcfg)
    pkts = receive_packets(chs, cfg, threshold=args.threshold,
                           expect_packets=args.expect)
    for p in pkts:
        print(f"packet hop_seed={p.info.hop_seed} "
              f"rate={p.info.coding_rate.value} "
              f"len={p.info.payload_len} "
              f"crc={'ok' if p.crc_ok else 'BAD'} "
              f"payload={p.payload.hex()} "
              f"start={p.estimate.packet_start:.1f} "
              f"cfo_hz={p.estimate.cfo_hz:.1f} "
              f"doppler_hz_s={p.estimate.doppler_hz_s:.1f} "
              f"headers={len(p.headers)}")
    print(f"{len(pkts)} packet(s) decoded")
    return 0


def _cmd_sweep(args) -> int:
    data = sweep_mod.load_config_dict(args.config)
    if args.seed is None and "seed" not in data:
        raise ValueError(
            "sweep is stochastic: give --seed or a seed key in the config"
        )
    spec = sweep_mod.load_sweep_spec(args.config)
    if args.seed is not None:
        spec.seed = args.seed
    if args.out is not None:
        spec.out_path = args.out
    points = spec.points()
    if args.dry_run:
        for i, pt in enumerate(points):
            print(f"point {i}: " + " ".join(
                f"{k}={v}" for k, v in pt.items()))
        print(f"{len(points)} grid points x "
              f"{spec.packets_per_point} packets "
              f"(payload {spec.payload_len} bytes, seed {spec.seed}) "
              f"-> {spec.out_path}")
        return 0
    rows = sweep_mod.run_per_sweep(
        spec,
        progress=lambda r: print(
            " ".join(f"{k}={r[k]}" for k in sweep_mod.CSV_FIELDS),
            flush=True,
        ),
    )
    print(f"{len(rows)} new point(s) -> {spec.out_path}")
    return 0


def _cmd_aloha(args) -> int:
    sc = aloha_mod.AlohaScenario(
        mode=args.mode, rule=args.rule, n_channels=args.channels,
        coding_rate=CodingRate.parse(args.coding_rate),
        packet_len=args.packet_len,
        require_all_headers=not args.any_header,
        seed=args.seed,
    )
    n_steps = int(round((args.g_max - args.g_min) / args.g_step)) + 1
    g_values = [round(args.g_min + i * args.g_step, 9)
                for i in range(n_steps)]
    rows = aloha_mod.simulate_throughput(sc, g_values, args.packets)
    fields = ["mode", "rule", "n_channels", "coding_rate",
              "offered_load", "throughput"]
    with open(args.out, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    peak = max(rows, key=lambda r: r["throughput"])
    print(f"wrote {args.out}: {len(rows)} points; peak throughput "
          f"{peak['throughput']:.3f} at G={peak['offered_load']:g}")
    return 0


def _cmd_timing(args) -> int:
    rows = sweep_mod.run_timing_study(
        esno_db=args.esno_db, doppler_hz_s=args.doppler_hz_s,
        trials=args.trials, seed=args.seed,
        sto_symbols=args.sto_symbols,
        progress=lambda r: print(
            " ".join(f"{k}={r[k]}" for k in sweep_mod.TIMING_CSV_FIELDS),
            flush=True,
        ),
    )
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=sweep_mod.TIMING_CSV_FIELDS)
            w.writeheader()
            w.writerows(rows)
        print(f"wrote {args.out}: {len(rows)} rows")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lrfhss",
        description="Frequency-hopping uplink simulator: transmitter, "
                    "satellite channel, receiver, PER sweeps and "
                    "multiple-access studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_tx(sub)
    _add_chan(sub)
    _add_rx(sub)
    _add_sweep(sub)
    _add_aloha(sub)
    _add_timing(sub)
    args = parser.parse_args(argv)
    handlers = {
        "tx": _cmd_tx, "chan": _cmd_chan, "rx": _cmd_rx,
        "sweep": _cmd_sweep, "aloha": _cmd_aloha, "timing": _cmd_timing,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
