"""Commodity-style demodulators and tag-bit recovery.

The FSK receiver makes a non-coherent decision per symbol by correlating
against each alphabet tone, optionally behind a channel filter of width w.
The OQPSK receiver correlates each rail against its pulse shape, centred on
the chip midpoints, and slices the sign.

Tag bits are recovered by comparing demodulated carrier bits to the
carrier's original bits: a window whose flip fraction is strictly above one
half decodes as 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import signal as sps

from .carrier import (
    CarrierConfig,
    FskConfig,
    PskConfig,
    as_bits,
    bit_centers,
    fsk_bits,
    pulse_shape,
)
from .iqcore import IqBuffer

DEFAULT_PREAMBLE = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.int8)
DEFAULT_SYNC_FLOOR = 0.75


class SyncError(RuntimeError):
    pass


@dataclass(frozen=True)
class DemodResult:
    bits: np.ndarray
    per_symbol_confidence: np.ndarray

    def __post_init__(self):
        if len(self.bits) != len(self.per_symbol_confidence):
            raise ValueError("bits and confidences must have equal length")


@dataclass(frozen=True)
class TagDecodeResult:
    tag_bits: np.ndarray
    flip_fractions: np.ndarray
    estimated_offset: int = 0


# -- FSK -----------------------------------------------------------------------


@lru_cache(maxsize=32)
def channel_filter(cfg: FskConfig) -> np.ndarray:
    """Linear-phase low-pass passing |f| < w/2, 16 symbols long."""
    ntaps = 16 * cfg.samples_per_symbol + 1
    return sps.firwin(
        ntaps, cfg.channel_bandwidth / 2, fs=cfg.sample_rate, window=("kaiser", 8.0)
    )


def band_limit_samples(x: np.ndarray, cfg: FskConfig) -> np.ndarray:
    return sps.oaconvolve(x, channel_filter(cfg), mode="same")


def fsk_correlations(buf: IqBuffer, cfg: FskConfig, band_limit: bool = False) -> np.ndarray:
    """|correlation| of every symbol with every alphabet tone, shape (K, n).

    The symbol-long correlators already cope with the tag's out-of-alphabet
    mixer image: with delta_f * T = 1/2, a mixed symbol correlates to zero
    against its original tone, leaving only the in-band image. ``band_limit`` adds the channel FIR in front, which
    also rejects arbitrary stationary out-of-band tones but smears images
    that the tag gates on and off every few symbols back into the band.
    """
    spsym = cfg.samples_per_symbol
    if buf.sample_rate != cfg.sample_rate:
        raise ValueError(f"buffer rate {buf.sample_rate} Hz != carrier rate {cfg.sample_rate} Hz")
    if len(buf) == 0 or len(buf) % spsym:
        raise ValueError(f"buffer length {len(buf)} is not a multiple of {spsym} samples per symbol")
    x = band_limit_samples(buf.samples, cfg) if band_limit else buf.samples
    x = x.reshape(-1, spsym)
    n = np.arange(spsym) / cfg.sample_rate
    templates = np.exp(-2j * np.pi * np.outer(n, cfg.frequencies))
    return np.abs(x @ templates)


def demodulate_fsk(buf: IqBuffer, cfg: FskConfig, band_limit: bool = False) -> DemodResult:
    corr = fsk_correlations(buf, cfg, band_limit)
    symbols = np.argmax(corr, axis=1)
    top2 = np.sort(corr**2, axis=1)[:, -2:]
    total = top2.sum(axis=1)
    conf = np.divide(top2[:, 1] - top2[:, 0], total, out=np.zeros_like(total), where=total > 0)
    bits = fsk_bits(symbols, cfg)
    return DemodResult(bits, np.repeat(conf, cfg.bits_per_symbol))


# -- OQPSK ----------------------------------------------------------------------


def demodulate_oqpsk(buf: IqBuffer, cfg: PskConfig) -> DemodResult:
    spsym = cfg.samples_per_symbol
    lag = cfg.samples_per_chip if cfg.offset_mode else 0
    if buf.sample_rate != cfg.sample_rate:
        raise ValueError(f"buffer rate {buf.sample_rate} Hz != carrier rate {cfg.sample_rate} Hz")
    body = len(buf) - lag
    if body <= 0 or body % spsym:
        raise ValueError(
            f"buffer length {len(buf)} does not match whole symbols of {spsym} samples"
            + (f" plus a {lag}-sample Q tail" if lag else "")
        )
    k = body // spsym
    pulse = pulse_shape(cfg)
    x = buf.samples
    i_corr = x[: k * spsym].real.reshape(k, spsym) @ pulse
    q_corr = x[lag : lag + k * spsym].imag.reshape(k, spsym) @ pulse
    corr = np.empty(2 * k)
    corr[0::2], corr[1::2] = i_corr, q_corr
    bits = (corr < 0).astype(np.int8)
    full = cfg.rail_amplitude * (pulse @ pulse)
    conf = np.clip(np.abs(corr) / full, 0.0, 1.0)
    return DemodResult(bits, conf)


def demodulate(buf: IqBuffer, cfg: CarrierConfig, band_limit: bool = False) -> DemodResult:
    """Dispatch on carrier family; ``band_limit`` only affects FSK."""
    if isinstance(cfg, FskConfig):
        return demodulate_fsk(buf, cfg, band_limit)
    return demodulate_oqpsk(buf, cfg)


# -- tag bit recovery -------------------------------------------------------------


def bit_offset_for(cfg: CarrierConfig, sample_offset: int, num_bits: int) -> int:
    """Index of the first demodulated bit decided at or after ``sample_offset``."""
    return int(np.searchsorted(bit_centers(cfg, num_bits), sample_offset, side="left"))


def flip_fractions(rx_bits, carrier_bits, nbits: int, offset: int, count: int) -> np.ndarray:
    rx_bits, carrier_bits = as_bits(rx_bits), as_bits(carrier_bits)
    if nbits < 1:
        raise ValueError("bits per tag bit must be positive")
    if offset < 0:
        raise ValueError("offset must be non-negative")
    end = offset + count * nbits
    if end > min(rx_bits.size, carrier_bits.size):
        raise ValueError(
            f"{count} windows of {nbits} bits at offset {offset} need {end} bits; "
            f"have {rx_bits.size} demodulated and {carrier_bits.size} carrier bits"
        )
    flips = rx_bits[offset:end] != carrier_bits[offset:end]
    return flips.reshape(count, nbits).mean(axis=1)


def decode_tag_bits(
    rx: DemodResult,
    carrier_bits,
    nbits: int,
    offset_bits: int = 0,
    count: Optional[int] = None,
) -> TagDecodeResult:
    """Majority vote over windows of ``nbits`` carrier bits; ``count`` defaults
    to as many whole windows as fit."""
    if count is None:
        avail = min(len(rx.bits), len(carrier_bits)) - offset_bits
        count = max(avail // max(nbits, 1), 0)
    ff = flip_fractions(rx.bits, carrier_bits, nbits, offset_bits, count)
    return TagDecodeResult((ff > 0.5).astype(np.int8), ff, offset_bits)


def offset_agreement(
    rx: DemodResult,
    carrier_bits,
    nbits: int,
    preamble=DEFAULT_PREAMBLE,
    max_offset: Optional[int] = None,
) -> np.ndarray:
    """Soft agreement of the decoded preamble at each candidate bit offset.

    Agreement at offset d is the mean, over preamble windows, of the flip
    fraction where the preamble bit is 1 and of one minus it where it is 0.
    Candidates run over [0, nbits * len(preamble)), further capped at
    ``max_offset`` inclusive when the caller knows the frame length.
    """
    pre = as_bits(preamble)
    if pre.size == 0:
        raise ValueError("preamble must be non-empty")
    span = nbits * pre.size
    avail = min(len(rx.bits), len(carrier_bits))
    n_cand = min(span, avail - span + 1)
    if max_offset is not None:
        n_cand = min(n_cand, max_offset + 1)
    if n_cand < 1:
        raise ValueError(f"need at least {span} demodulated bits to search for the preamble")
    flips = (as_bits(rx.bits)[:avail] != as_bits(carrier_bits)[:avail]).astype(float)
    expect = np.repeat(pre, nbits).astype(float)
    agree = np.empty(n_cand)
    for d in range(n_cand):
        agree[d] = np.mean(np.where(expect == 1, flips[d : d + span], 1 - flips[d : d + span]))
    return agree


def search_offset(
    rx: DemodResult,
    carrier_bits,
    nbits: int,
    preamble=DEFAULT_PREAMBLE,
    floor: float = DEFAULT_SYNC_FLOOR,
    max_offset: Optional[int] = None,
) -> int:
    """Bit offset maximising preamble agreement; ties go to the smaller offset."""
    agree = offset_agreement(rx, carrier_bits, nbits, preamble, max_offset)
    best = int(np.argmax(agree))
    if agree[best] <= floor:
        raise SyncError(f"best preamble agreement {agree[best]:.3f} at offset {best} is not above {floor}")
    return best
