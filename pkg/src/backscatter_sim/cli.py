"""Command line entry point: ``backscatter-sim {sweep,trial,describe,spectrum}``.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 statistically
insufficient sweep under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import carrier as car
from . import harness
from .config import ConfigError, load, parse_snr
from .iqcore import IqBuffer, power, spectrum

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_INSUFFICIENT = 0, 1, 2, 3

log = logging.getLogger("backscatter_sim")


def _cmd_sweep(args) -> int:
    loaded = load(args.config)
    cfg = loaded.experiment
    if args.output:
        cfg = harness.dataclasses.replace(cfg, output_path=args.output)
    if args.workers:
        cfg = harness.dataclasses.replace(cfg, workers=args.workers)
    if not cfg.sufficient and args.strict:
        print(
            f"error: {cfg.trials_per_point * cfg.payload_bits} tag bits per point is below "
            f"{harness.MIN_TAG_BITS_PER_POINT}",
            file=sys.stderr,
        )
        return EXIT_INSUFFICIENT
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", harness.StatisticalInsufficiencyWarning)
        points = harness.run_sweep(cfg)
    if not cfg.sufficient:
        log.warning("statistically insufficient sweep: fewer than %d tag bits per point",
                    harness.MIN_TAG_BITS_PER_POINT)
    rates = harness.rate_table(cfg)
    for n, r in rates.items():
        log.info("N=%d: tag data rate %.6g bit/s", n, r)
    if args.plot:
        harness.emit_plot_script(points, args.plot)
    if not cfg.output_path:
        sys.stdout.write(harness.points_to_csv(points))
    return EXIT_OK


def _cmd_trial(args) -> int:
    loaded = load(args.config)
    cfg = loaded.experiment
    snr = parse_snr(args.snr) if args.snr is not None else loaded.snr_db
    n = args.n if args.n is not None else loaded.n
    res = harness.run_trial(cfg, snr, n, args.index, keep_stages=True)
    summary = {
        "snr_db": "inf" if np.isinf(snr) else snr,
        "n": n,
        "trial_index": args.index,
        "start_offset_samples": res.start_offset,
        "bit_offset": res.bit_offset,
        "synced": res.synced,
        "noise_seed": res.stages["noise_seed"],
        "tag_data_rate_bps": car.tag_data_rate(cfg.carrier, n),
        "tag_bits_sent": res.sent.tolist(),
        "tag_bits_decoded": res.decoded.tolist(),
        "tag_bit_errors": res.errors,
        "carrier_power": power(res.stages["carrier"]),
        "tagged_power": power(res.stages["tagged"]),
    }
    if args.dump:
        out = Path(args.dump)
        out.mkdir(parents=True, exist_ok=True)
        for stage in ("carrier", "tagged", "received"):
            res.stages[stage].save(out / f"{stage}.iq")
        np.savetxt(out / "carrier_bits.txt", res.stages["carrier_bits"], fmt="%d")
        np.savetxt(out / "tag_bits.txt", res.stages["tag_bits"], fmt="%d")
        np.savetxt(out / "demod_bits.txt", res.stages["demod_bits"], fmt="%d")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_describe(args) -> int:
    try:
        cfg = car.preset(args.preset)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    table = car.describe(cfg)
    width = max(len(k) for k in table)
    for k, v in table.items():
        print(f"{k:<{width}}  {v}")
    for n in (1, 4, 8, 16):
        print(f"{'tag_rate_bps_N=' + str(n):<{width}}  {car.tag_data_rate(cfg, n):g}")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    buf = IqBuffer.load(args.iq_file)
    spec = spectrum(buf, args.resolution)
    print(f"# samples={len(buf)} sample_rate={buf.sample_rate:g} power={power(buf):.6g}")
    if args.peaks:
        order = np.argsort(spec.power_db)[::-1][: args.peaks]
        print("freq_hz,power_db")
        for i in sorted(order, key=lambda i: spec.freqs[i]):
            print(f"{spec.freqs[i]:.6g},{spec.power_db[i]:.3f}")
    else:
        print("freq_hz,power_db")
        for f, p in spec.bins:
            print(f"{f:.6g},{p:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="backscatter-sim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="BER sweep over SNR x N")
    s.add_argument("config")
    s.add_argument("--output", help="CSV path (overrides config)")
    s.add_argument("--workers", type=int)
    s.add_argument("--plot", help="write a plotting script here (and its CSV alongside)")
    s.add_argument("--strict", action="store_true", help="exit 3 on statistically insufficient sweeps")
    s.set_defaults(func=_cmd_sweep)

    t = sub.add_parser("trial", help="run one trial and dump per-stage artifacts")
    t.add_argument("config")
    t.add_argument("--snr", help="dB or 'inf' (default: channel.snr_db)")
    t.add_argument("--n", type=int)
    t.add_argument("--index", type=int, default=0)
    t.add_argument("--dump", help="directory for IQ files and bit dumps")
    t.set_defaults(func=_cmd_trial)

    d = sub.add_parser("describe", help="print a carrier preset's parameters")
    d.add_argument("preset", choices=sorted(car.PRESETS))
    d.set_defaults(func=_cmd_describe)

    sp = sub.add_parser("spectrum", help="power spectrum of an RWIQ file")
    sp.add_argument("iq_file")
    sp.add_argument("--resolution", type=float, default=10e3, help="bin width in Hz")
    sp.add_argument("--peaks", type=int, default=0, help="print only the N strongest bins")
    sp.set_defaults(func=_cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
