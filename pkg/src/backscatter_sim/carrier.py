"""Productive carriers: binary/M-ary FSK with optional Gaussian shaping
(Bluetooth-like) and OQPSK with optional MSK half-sine shaping (ZigBee-like).

Bit-to-symbol maps
------------------

FSK, alphabet index k maps to frequency ``-dev + k * 2 dev / (n - 1)``.
Groups of log2(n) bits select k through a Gray code (MSB first)::

    n = 2:  bit 0 -> k=0 (-dev)      bit 1 -> k=1 (+dev)
    n = 4:  00 -> 0   01 -> 1   11 -> 2   10 -> 3

QPSK/OQPSK, bit 0 drives its rail to +A/sqrt2 and bit 1 to -A/sqrt2.
Even-indexed bits go to I, odd-indexed bits to Q. The resulting
constellation index i sits at phase ``2 pi i / 4 + pi / 4``::

    i  (I,Q) bits  phase
    0  00          pi/4
    1  10          3pi/4
    2  11          5pi/4
    3  01          7pi/4

Adjacent indices differ in one bit, and a rotation by -2 pi k / 4 moves index
i to (i - k) mod 4.

Timing
------

An FSK symbol carries log2(n) bits over ``samples_per_symbol`` samples.
An OQPSK symbol is one I bit plus one Q bit over ``2 * samples_per_chip``
samples. With offset_mode the Q rail lags by one chip (half a symbol), so
the modulated buffer carries an extra chip of tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .iqcore import IqBuffer


def as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError("bit stream must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit stream values must be 0 or 1")
    return arr.astype(np.int8)


def gray_code(k: int) -> int:
    return k ^ (k >> 1)


def gray_decode(g: int) -> int:
    k = 0
    while g:
        k ^= g
        g >>= 1
    return k


@dataclass(frozen=True)
class FskConfig:
    symbol_rate: float = 1e6
    deviation: float = 250e3
    alphabet_size: int = 2
    channel_bandwidth: float = 1e6
    gaussian_bt: Optional[float] = 0.5
    samples_per_symbol: int = 8

    family = "fsk"

    def __post_init__(self):
        n = self.alphabet_size
        if n < 2 or n % 2 or n & (n - 1):
            raise ValueError(f"alphabet_size must be an even power of two, got {n}")
        if self.symbol_rate <= 0 or self.deviation <= 0 or self.channel_bandwidth <= 0:
            raise ValueError("symbol_rate, deviation and channel_bandwidth must be positive")
        if self.samples_per_symbol < 1:
            raise ValueError("samples_per_symbol must be a positive integer")
        if self.gaussian_bt is not None and self.gaussian_bt <= 0:
            raise ValueError("gaussian_bt must be positive when set")
        if 2 * self.deviation * n >= self.sample_rate:
            raise ValueError(
                f"2*deviation*n = {2 * self.deviation * n:g} Hz must stay below the "
                f"sample rate {self.sample_rate:g} Hz"
            )

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.samples_per_symbol

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.alphabet_size))

    @property
    def frequencies(self) -> np.ndarray:
        """Alphabet frequencies f_0 < ... < f_{n-1}, equally spaced."""
        n = self.alphabet_size
        return self.deviation * (2 * np.arange(n) - (n - 1)) / (n - 1)

    @property
    def modulation_index(self) -> float:
        """(f_1 - f_0) / w for the binary case; outermost spacing for n > 2."""
        f = self.frequencies
        return float((f[-1] - f[0]) / self.channel_bandwidth)

    @property
    def mixer_shift(self) -> float:
        """Tag mixer frequency f_{n/2} - f_0: maps the upper half of the
        alphabet onto the lower half and pushes the other image out of band."""
        f = self.frequencies
        return float(f[self.alphabet_size // 2] - f[0])

    @property
    def alignment_lead(self) -> int:
        return 0


@dataclass(frozen=True)
class PskConfig:
    M: int = 4
    chip_rate: float = 2e6
    offset_mode: bool = True
    msk_shaping: bool = True
    samples_per_chip: int = 4
    amplitude: float = 1.0

    family = "oqpsk"

    def __post_init__(self):
        if self.M != 4:
            raise ValueError("only M = 4 (QPSK/OQPSK) is supported")
        if self.chip_rate <= 0:
            raise ValueError("chip_rate must be positive")
        if self.samples_per_chip < 1:
            raise ValueError("samples_per_chip must be a positive integer")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")

    @property
    def samples_per_symbol(self) -> int:
        return 2 * self.samples_per_chip

    @property
    def symbol_rate(self) -> float:
        return self.chip_rate / 2

    @property
    def sample_rate(self) -> float:
        return self.chip_rate * self.samples_per_chip

    @property
    def bits_per_symbol(self) -> int:
        return 2

    @property
    def rail_amplitude(self) -> float:
        """Peak I or Q level; MSK keeps |x| = amplitude, otherwise the corners do."""
        if self.msk_shaping and self.offset_mode:
            return self.amplitude
        return self.amplitude / np.sqrt(2)

    @property
    def alignment_lead(self) -> int:
        """Sample offset at which a tag switching instant splits no bit evenly.

        Every chip boundary is the peak of one rail's pulse; a quarter symbol
        later both straddling bits keep most of their energy on one side.
        """
        return self.samples_per_chip // 2 if self.offset_mode else 0


CarrierConfig = Union[FskConfig, PskConfig]


PRESETS: dict[str, CarrierConfig] = {
    "bluetooth-like": FskConfig(
        symbol_rate=1e6,
        deviation=250e3,
        alphabet_size=2,
        channel_bandwidth=1e6,
        gaussian_bt=0.5,
        samples_per_symbol=8,
    ),
    "zigbee-like": PskConfig(
        M=4,
        chip_rate=2e6,
        offset_mode=True,
        msk_shaping=True,
        samples_per_chip=4,
        amplitude=1.0,
    ),
}


def preset(name: str) -> CarrierConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown carrier preset {name!r}; choose from {sorted(PRESETS)}") from None


def describe(cfg: CarrierConfig) -> dict:
    """Flat parameter table, as printed by the CLI ``describe`` command."""
    if isinstance(cfg, FskConfig):
        return {
            "family": "fsk",
            "symbol_rate_hz": cfg.symbol_rate,
            "deviation_hz": cfg.deviation,
            "alphabet_size": cfg.alphabet_size,
            "alphabet_hz": [float(f) for f in cfg.frequencies],
            "channel_bandwidth_hz": cfg.channel_bandwidth,
            "modulation_index": cfg.modulation_index,
            "gaussian_bt": cfg.gaussian_bt,
            "samples_per_symbol": cfg.samples_per_symbol,
            "sample_rate_hz": cfg.sample_rate,
            "tag_mixer_shift_hz": cfg.mixer_shift,
        }
    return {
        "family": "oqpsk" if cfg.offset_mode else "qpsk",
        "M": cfg.M,
        "chip_rate_hz": cfg.chip_rate,
        "symbol_rate_hz": cfg.symbol_rate,
        "offset_mode": cfg.offset_mode,
        "msk_shaping": cfg.msk_shaping,
        "samples_per_chip": cfg.samples_per_chip,
        "samples_per_symbol": cfg.samples_per_symbol,
        "sample_rate_hz": cfg.sample_rate,
        "amplitude": cfg.amplitude,
    }


def symbol_boundaries(cfg: CarrierConfig, num_symbols: int) -> np.ndarray:
    if num_symbols < 0:
        raise ValueError("num_symbols must be non-negative")
    return np.arange(num_symbols + 1) * cfg.samples_per_symbol


def tag_data_rate(cfg: CarrierConfig, n: int) -> float:
    """Tag bits per second when one tag bit spans ``n`` carrier symbols."""
    if n < 1:
        raise ValueError("N must be a positive integer")
    return cfg.symbol_rate / n


# -- FSK ---------------------------------------------------------------------


def fsk_symbols(bits, cfg: FskConfig) -> np.ndarray:
    bits = as_bits(bits)
    bps = cfg.bits_per_symbol
    if bits.size == 0:
        raise ValueError("cannot modulate an empty bit stream")
    if bits.size % bps:
        raise ValueError(f"{bits.size} bits is not a multiple of {bps} bits per symbol")
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    codes = groups @ weights
    return np.array([gray_decode(int(c)) for c in codes], dtype=int)


def fsk_bits(symbols: np.ndarray, cfg: FskConfig) -> np.ndarray:
    bps = cfg.bits_per_symbol
    codes = np.array([gray_code(int(k)) for k in symbols], dtype=int)
    shifts = np.arange(bps - 1, -1, -1)
    return ((codes[:, None] >> shifts) & 1).reshape(-1).astype(np.int8)


def gaussian_taps(bt: float, sps: int, span: int = 3) -> np.ndarray:
    """Unit-sum Gaussian pulse truncated to ``span`` symbols."""
    t = np.arange(-span * sps / 2, span * sps / 2 + 1) / sps
    sigma = math.sqrt(math.log(2)) / (2 * math.pi * bt)
    h = np.exp(-(t**2) / (2 * sigma**2))
    return h / h.sum()


def instantaneous_frequency(bits, cfg: FskConfig) -> np.ndarray:
    sym = fsk_symbols(bits, cfg)
    freq = np.repeat(cfg.frequencies[sym], cfg.samples_per_symbol)
    if cfg.gaussian_bt is not None:
        taps = gaussian_taps(cfg.gaussian_bt, cfg.samples_per_symbol)
        half = taps.size // 2
        padded = np.pad(freq, half, mode="edge")
        freq = np.convolve(padded, taps, mode="valid")
    return freq


def modulate_fsk(bits, cfg: FskConfig) -> IqBuffer:
    """Continuous-phase FSK; phase starts at zero on the first sample."""
    freq = instantaneous_frequency(bits, cfg)
    step = 2 * np.pi * freq / cfg.sample_rate
    phase = np.concatenate([[0.0], np.cumsum(step[:-1])])
    return IqBuffer(np.exp(1j * phase), cfg.sample_rate)


# -- QPSK / OQPSK -------------------------------------------------------------


QPSK_PHASE_OFFSET = np.pi / 4


def qpsk_point(i: int, cfg: PskConfig) -> complex:
    """Constellation point of index i (see module table)."""
    return cfg.amplitude * np.exp(1j * (2 * np.pi * i / cfg.M + QPSK_PHASE_OFFSET))


def qpsk_index(z) -> np.ndarray:
    """Ideal slicer: nearest constellation index for each complex value."""
    ang = np.angle(np.asarray(z)) - QPSK_PHASE_OFFSET
    return np.mod(np.round(ang / (np.pi / 2)), 4).astype(int)


def pulse_shape(cfg: PskConfig) -> np.ndarray:
    n = cfg.samples_per_symbol
    if cfg.msk_shaping:
        return np.sin(np.pi * np.arange(n) / n)
    return np.ones(n)


def rail_levels(bits) -> np.ndarray:
    return 1.0 - 2.0 * as_bits(bits)


def modulate_oqpsk(bits, cfg: PskConfig) -> IqBuffer:
    bits = as_bits(bits)
    if bits.size == 0 or bits.size % 2:
        raise ValueError(f"OQPSK needs a non-empty even number of bits, got {bits.size}")
    levels = rail_levels(bits) * cfg.rail_amplitude
    i_lv, q_lv = levels[0::2], levels[1::2]
    pulse = pulse_shape(cfg)
    sps = cfg.samples_per_symbol
    lag = cfg.samples_per_chip if cfg.offset_mode else 0
    n_sym = i_lv.size
    out = np.zeros(n_sym * sps + lag, dtype=complex)
    out[: n_sym * sps] += np.kron(i_lv, pulse)
    out[lag : lag + n_sym * sps] += 1j * np.kron(q_lv, pulse)
    return IqBuffer(out, cfg.sample_rate)


def oqpsk_warmup_mask(cfg: PskConfig, length: int) -> np.ndarray:
    """True on samples outside the first and last half symbol."""
    mask = np.ones(length, dtype=bool)
    edge = cfg.samples_per_chip + (cfg.samples_per_chip if cfg.offset_mode else 0)
    mask[:edge] = False
    mask[max(length - edge, 0):] = False
    return mask


def modulate(bits, cfg: CarrierConfig) -> IqBuffer:
    if isinstance(cfg, FskConfig):
        return modulate_fsk(bits, cfg)
    return modulate_oqpsk(bits, cfg)


def bits_for_symbols(cfg: CarrierConfig, num_symbols: int) -> int:
    return num_symbols * cfg.bits_per_symbol


def bit_centers(cfg: CarrierConfig, num_bits: int) -> np.ndarray:
    """Sample position at which each demodulated bit is decided."""
    m = np.arange(num_bits)
    if isinstance(cfg, FskConfig):
        sym = m // cfg.bits_per_symbol
        return sym * cfg.samples_per_symbol + cfg.samples_per_symbol / 2
    spc = cfg.samples_per_chip
    if cfg.offset_mode:
        return (m + 1) * spc
    return (m // 2) * cfg.samples_per_symbol + spc
