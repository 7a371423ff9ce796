"""Monte Carlo BER sweeps: carrier -> tag -> channel -> receiver.

Every (snr, N, trial) tuple owns a PCG64 stream derived from
``SeedSequence(seed, spawn_key=(snr_key, N, trial))``. Results are reduced
in tuple order, so a sweep produces the same CSV for any worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import carrier as car
from . import channel as chan
from . import receiver as rcv
from .carrier import CarrierConfig, FskConfig
from .tag import TagProfile, embed

CSV_COLUMNS = ("snr_db", "n", "trials", "tag_bits_total", "bit_errors", "ber", "wilson_95_halfwidth")
MIN_TAG_BITS_PER_POINT = 1000
SYNC_MODES = ("genie", "preamble")


class StatisticalInsufficiencyWarning(UserWarning):
    pass


class TrialError(RuntimeError):
    pass


def default_profile(ccfg: CarrierConfig, n: int = 8) -> TagProfile:
    """Mixer at f_{n/2} - f_0 for FSK carriers, 0/pi phase delay for OQPSK;
    random start offset."""
    if isinstance(ccfg, FskConfig):
        return TagProfile("frequency-shift", n, delta_f=ccfg.mixer_shift, start_offset=None)
    return TagProfile("phase-delay", n, phase_set=(0, 2), start_offset=None)


@dataclass(frozen=True)
class ExperimentConfig:
    carrier: CarrierConfig = field(default_factory=lambda: car.preset("bluetooth-like"))
    carrier_preset: str = "bluetooth-like"
    tag: Optional[TagProfile] = None
    leak_gain: float = 0.0
    snr_db_list: tuple = tuple(range(-14, 5, 2))
    n_list: tuple = (4, 8, 16)
    trials_per_point: int = 200
    tag_bits_per_trial: int = 64
    seed: int = 0
    output_path: Optional[str] = None
    sync: str = "genie"
    workers: int = 1
    band_limit: bool = False

    def __post_init__(self):
        if self.tag is None:
            object.__setattr__(self, "tag", default_profile(self.carrier))
        if not self.snr_db_list or not self.n_list:
            raise ValueError("snr_db_list and n_list must be non-empty")
        if any(n < 1 for n in self.n_list):
            raise ValueError("every N must be a positive integer")
        if self.trials_per_point < 1 or self.tag_bits_per_trial < 1:
            raise ValueError("trials_per_point and tag_bits_per_trial must be positive")
        if self.sync not in SYNC_MODES:
            raise ValueError(f"sync must be one of {SYNC_MODES}")
        if self.sync == "preamble" and self.tag_bits_per_trial <= len(rcv.DEFAULT_PREAMBLE):
            raise ValueError("preamble sync needs more tag bits per trial than preamble bits")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def sufficient(self) -> bool:
        return self.trials_per_point * self.payload_bits >= MIN_TAG_BITS_PER_POINT

    @property
    def payload_bits(self) -> int:
        if self.sync == "preamble":
            return self.tag_bits_per_trial - len(rcv.DEFAULT_PREAMBLE)
        return self.tag_bits_per_trial

    def profile_for(self, n: int) -> TagProfile:
        return dataclasses.replace(self.tag, n=n)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    n: int
    trials: int
    tag_bits_total: int
    bit_errors: int
    ber: float
    wilson_95_halfwidth: float


@dataclass
class TrialResult:
    sent: np.ndarray
    decoded: np.ndarray
    start_offset: int
    bit_offset: int
    synced: bool = True
    stages: dict = field(default_factory=dict)
    true_bit_offset: int = 0

    @property
    def errors(self) -> int:
        return int(np.sum(self.sent != self.decoded))


def snr_key(snr_db: float) -> int:
    """Non-negative integer naming an SNR value in seed derivation."""
    if math.isinf(snr_db):
        return 2**32 if snr_db > 0 else 2**32 + 1
    milli = int(round(snr_db * 1000))
    return 2 * milli if milli >= 0 else -2 * milli - 1


def wilson_halfwidth(errors: int, total: int, z: float = 1.959963984540054) -> float:
    if total == 0:
        return 0.0
    p = errors / total
    denom = 1 + z * z / total
    return z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom


def wilson_interval(errors: int, total: int, z: float = 1.959963984540054) -> tuple[float, float]:
    p = errors / total
    centre = (p + z * z / (2 * total)) / (1 + z * z / total)
    hw = wilson_halfwidth(errors, total, z)
    return centre - hw, centre + hw


def run_trial(cfg: ExperimentConfig, snr_db: float, n: int, trial_index: int, keep_stages: bool = False) -> TrialResult:
    """One pass through the pipeline with fresh random carrier and tag bits.

    The receiver knows the carrier's original bits. With ``sync="genie"``
    it is also told the tag's start offset; with ``"preamble"`` it finds it
    by searching for the preamble, and a failed search decodes as all zeros.
    """
    try:
        return _run_trial(cfg, snr_db, n, trial_index, keep_stages)
    except Exception as exc:
        raise TrialError(f"trial snr={snr_db} N={n} index={trial_index} failed: {exc}") from exc


def _run_trial(cfg, snr_db, n, trial_index, keep_stages):
    ccfg = cfg.carrier
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(snr_key(snr_db), n, trial_index))
    data_ss, noise_ss = ss.spawn(2)
    rng = np.random.Generator(np.random.PCG64(data_ss))

    profile = cfg.profile_for(n)
    window = n * ccfg.samples_per_symbol
    payload = rng.integers(0, 2, cfg.payload_bits, dtype=np.int8)
    if cfg.sync == "preamble":
        tag_bits = np.concatenate([rcv.DEFAULT_PREAMBLE, payload])
    else:
        tag_bits = payload
    num_symbols = (tag_bits.size + 1) * n
    carrier_bits = rng.integers(0, 2, car.bits_for_symbols(ccfg, num_symbols), dtype=np.int8)
    offset = profile.start_offset
    if offset is None:
        offset = int(rng.integers(0, window))

    carrier_sig = car.modulate(carrier_bits, ccfg)
    start = ccfg.alignment_lead + offset
    tagged = embed(carrier_sig, tag_bits, profile, ccfg.samples_per_symbol, start_offset=start)
    model = chan.ChannelModel(
        snr_db=snr_db,
        leak_gain=cfg.leak_gain,
        seed=int(noise_ss.generate_state(1, np.uint64)[0]),
    )
    received = chan.apply(tagged, carrier_sig, model)
    rx = rcv.demodulate(received, ccfg, band_limit=cfg.band_limit)

    nbits = n * ccfg.bits_per_symbol
    true_bit_offset = rcv.bit_offset_for(ccfg, start, carrier_bits.size)
    synced = True
    if cfg.sync == "preamble":
        try:
            # the receiver knows the frame length, so only offsets where it fits
            slack = carrier_bits.size - tag_bits.size * nbits
            bit_offset = rcv.search_offset(rx, carrier_bits, nbits, max_offset=slack)
        except rcv.SyncError:
            bit_offset, synced = true_bit_offset, False
        skip = len(rcv.DEFAULT_PREAMBLE)
    else:
        bit_offset, skip = true_bit_offset, 0

    if synced:
        res = rcv.decode_tag_bits(rx, carrier_bits, nbits, bit_offset + skip * nbits, payload.size)
        decoded = res.tag_bits
    else:
        decoded = np.zeros_like(payload)

    stages = {}
    if keep_stages:
        stages = {
            "carrier_bits": carrier_bits,
            "tag_bits": tag_bits,
            "carrier": carrier_sig,
            "tagged": tagged,
            "received": received,
            "demod_bits": rx.bits,
            "noise_seed": model.seed,
        }
    return TrialResult(payload, decoded, offset, bit_offset, synced, stages, true_bit_offset)


def run_sweep(cfg: ExperimentConfig, workers: Optional[int] = None) -> list[BerPoint]:
    """One BerPoint per (snr, N), in config order; writes CSV if output_path set."""
    if not cfg.sufficient:
        warnings.warn(
            f"{cfg.trials_per_point * cfg.payload_bits} tag bits per point is below "
            f"{MIN_TAG_BITS_PER_POINT}; BER estimates will be coarse",
            StatisticalInsufficiencyWarning,
            stacklevel=2,
        )
    workers = cfg.workers if workers is None else workers
    grid = [(snr, n) for snr in cfg.snr_db_list for n in cfg.n_list]
    # chunk each point into slices of trials so parallel runs stay balanced
    chunk = max(1, math.ceil(cfg.trials_per_point / max(1, 4 * workers)))
    tasks, owners = [], []
    for gi, (snr, n) in enumerate(grid):
        for lo in range(0, cfg.trials_per_point, chunk):
            hi = min(lo + chunk, cfg.trials_per_point)
            tasks.append((cfg, snr, n, lo, hi))
            owners.append(gi)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errs = list(pool.map(_chunk_errors, tasks))
    else:
        errs = [_chunk_errors(t) for t in tasks]

    totals = [0] * len(grid)
    for gi, e in zip(owners, errs):
        totals[gi] += e
    bits = cfg.trials_per_point * cfg.payload_bits
    points = [
        BerPoint(
            snr_db=float(snr),
            n=int(n),
            trials=cfg.trials_per_point,
            tag_bits_total=bits,
            bit_errors=int(e),
            ber=e / bits,
            wilson_95_halfwidth=wilson_halfwidth(int(e), bits),
        )
        for (snr, n), e in zip(grid, totals)
    ]
    if cfg.output_path:
        write_csv(points, cfg.output_path)
    return points


def _chunk_errors(task) -> int:
    cfg, snr, n, lo, hi = task
    return sum(run_trial(cfg, snr, n, t).errors for t in range(lo, hi))


def _lit(x: float) -> str:
    return f'float("{_fmt(x)}")' if math.isinf(x) else _fmt(x)


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def points_to_csv(points: Sequence[BerPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow(
            [_fmt(p.snr_db), p.n, p.trials, p.tag_bits_total, p.bit_errors, _fmt(p.ber), _fmt(p.wilson_95_halfwidth)]
        )
    return buf.getvalue()


def write_csv(points: Sequence[BerPoint], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(points_to_csv(points))
    return path


def read_csv(path) -> list[BerPoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        BerPoint(
            snr_db=float(r["snr_db"]),
            n=int(r["n"]),
            trials=int(r["trials"]),
            tag_bits_total=int(r["tag_bits_total"]),
            bit_errors=int(r["bit_errors"]),
            ber=float(r["ber"]),
            wilson_95_halfwidth=float(r["wilson_95_halfwidth"]),
        )
        for r in rows
    ]


_PLOT_TEMPLATE = '''\
"""BER vs SNR, one curve per N. Generated from {csv_name}."""

from pathlib import Path

import matplotlib.pyplot as plt

SERIES = {{
{series}
}}


def main(out=Path(__file__).with_name("{png_name}")):
    fig, ax = plt.subplots(figsize=(6, 4))
    for n, (snr, ber, hw) in SERIES.items():
        floor = [max(b, 1e-5) for b in ber]
        ax.errorbar(snr, floor, yerr=hw, marker="o", capsize=2, label=f"N = {{n}}")
    ax.set_yscale("log")
    ax.set_xlabel("SNR (dB, carrier reference)")
    ax.set_ylabel("tag BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    main()
'''


def emit_plot_script(points: Sequence[BerPoint], path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` and a self-contained matplotlib script at ``path``."""
    if not points:
        raise ValueError("no points to plot")
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    by_n: dict[int, list[BerPoint]] = {}
    for p in points:
        by_n.setdefault(p.n, []).append(p)
    lines = []
    for n in sorted(by_n):
        pts = sorted(by_n[n], key=lambda p: p.snr_db)
        snr = ", ".join(_lit(p.snr_db) for p in pts)
        ber = ", ".join(_fmt(p.ber) for p in pts)
        hw = ", ".join(_fmt(p.wilson_95_halfwidth) for p in pts)
        lines.append(f"    {n}: ([{snr}], [{ber}], [{hw}]),")
    script = _PLOT_TEMPLATE.format(
        csv_name=csv_path.name, png_name=path.with_suffix(".png").name, series="\n".join(lines)
    )
    write_csv(points, csv_path)
    path.write_text(script)
    return csv_path, path


def rate_table(cfg: ExperimentConfig) -> dict[int, float]:
    """Tag data rate (bit/s) for each N in the sweep."""
    return {n: car.tag_data_rate(cfg.carrier, n) for n in cfg.n_list}
