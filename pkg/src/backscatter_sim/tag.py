"""Tag-side reflection: impedance-switched reflection coefficients, mixer
frequency shifting, phase rotation, tag-bit embedding and the envelope
detector that carries the packet-length control channel.

The tag never sees carrier bits or symbol boundaries. ``embed`` receives raw
samples plus ``samples_per_symbol`` only to size its N-symbol windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d

from .carrier import as_bits
from .iqcore import IqBuffer


class PassivityError(ValueError):
    """A passive tag cannot reflect more power than it receives."""


@dataclass(frozen=True)
class Impedance:
    resistance: float
    reactance: float = 0.0

    @property
    def z(self) -> complex:
        return complex(self.resistance, self.reactance)

    @classmethod
    def of(cls, z: complex) -> "Impedance":
        return cls(z.real, z.imag)


def reflection_coefficient(z_t: Impedance, z_a: Impedance) -> complex:
    """Gamma = (Z_T - conj(Z_A)) / (Z_T + Z_A)."""
    if z_a.resistance <= 0:
        raise ValueError("antenna resistance must be positive")
    if z_t.resistance < 0:
        raise PassivityError("tag load resistance must be non-negative")
    den = z_t.z + z_a.z
    if den == 0:
        raise ZeroDivisionError("Z_T + Z_A is zero")
    return (z_t.z - z_a.z.conjugate()) / den


def reflect(buf: IqBuffer, gamma: complex) -> IqBuffer:
    if abs(gamma) > 1 + 1e-12:
        raise PassivityError(f"|gamma| = {abs(gamma):.6g} exceeds 1")
    return buf.with_samples(buf.samples * gamma)


def mix(buf: IqBuffer, delta_f: float) -> IqBuffer:
    """Multiply by a real cosine at ``delta_f``, producing images at f +- delta_f."""
    if delta_f < 0:
        raise ValueError("delta_f must be non-negative")
    if delta_f >= buf.sample_rate / 2:
        raise ValueError(f"delta_f {delta_f} Hz is not below Nyquist")
    return buf.with_samples(buf.samples * _mixer_wave(len(buf), delta_f, buf.sample_rate))


def _mixer_wave(n: int, delta_f: float, fs: float, start: int = 0) -> np.ndarray:
    t = (start + np.arange(n)) / fs
    return np.cos(2 * np.pi * delta_f * t)


def phase_delay(buf: IqBuffer, k: int, M: int = 4) -> IqBuffer:
    """Rotate by -2 pi k / M, the baseband effect of a carrier delay of k/(M f)."""
    if not 0 <= k < M:
        raise ValueError(f"k must lie in [0, {M}), got {k}")
    return buf.with_samples(buf.samples * _rotation(k, M))


def _rotation(k: int, M: int) -> complex:
    # exact values for the quarter turns so that pi rotation is a plain negation
    if (4 * k) % M == 0:
        return (1, -1j, -1, 1j)[(4 * k // M) % 4]
    return np.exp(-2j * np.pi * k / M)


MODES = ("frequency-shift", "phase-delay")


@dataclass(frozen=True)
class TagProfile:
    """How a tag embeds its bits.

    ``start_offset`` is a sample count, or None meaning "draw uniformly from
    [0, N * samples_per_symbol) per trial".
    """

    mode: str = "frequency-shift"
    n: int = 8
    delta_f: float = 0.0
    phase_set: tuple = (0, 2)
    start_offset: Optional[int] = 0
    gamma_on: complex = 1.0
    gamma_off: complex = 1.0
    M: int = 4

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n < 1:
            raise ValueError("N must be a positive integer")
        if self.delta_f < 0:
            raise ValueError("delta_f must be non-negative")
        if abs(self.gamma_on) > 1 or abs(self.gamma_off) > 1:
            raise PassivityError("reflection coefficients must satisfy |gamma| <= 1")
        ks = tuple(int(k) for k in self.phase_set)
        if len(ks) != 2 or any(not 0 <= k < self.M for k in ks):
            raise ValueError(f"phase_set must hold two phase steps in [0, {self.M}), got {self.phase_set}")
        object.__setattr__(self, "phase_set", ks)
        if self.start_offset is not None and self.start_offset < 0:
            raise ValueError("start_offset must be non-negative")

    @property
    def phase_set_radians(self) -> tuple[float, float]:
        return tuple(2 * math.pi * k / self.M for k in self.phase_set)

    def window_samples(self, samples_per_symbol: int) -> int:
        return self.n * samples_per_symbol


def embed(
    buf: IqBuffer,
    tag_bits,
    profile: TagProfile,
    samples_per_symbol: int,
    start_offset: Optional[int] = None,
) -> IqBuffer:
    """Embed tag bits, one per ``profile.n * samples_per_symbol`` samples.

    Bit 0 uses the first reflection state (pass-through mixer, phase step
    ``phase_set[0]``, ``gamma_off``); bit 1 the second (mixer at delta_f,
    ``phase_set[1]``, ``gamma_on``). Switching is instantaneous.
    """
    tag_bits = as_bits(tag_bits)
    offset = profile.start_offset if start_offset is None else start_offset
    if offset is None:
        raise ValueError("start_offset is random in this profile; pass an explicit offset")
    win = profile.window_samples(samples_per_symbol)
    need = offset + tag_bits.size * win
    if need > len(buf):
        raise ValueError(f"buffer too short: need {need} samples, have {len(buf)}")

    out = buf.samples.copy()
    span = slice(offset, need)
    state = np.repeat(tag_bits, win).astype(bool)
    seg = out[span]
    if profile.mode == "frequency-shift":
        if profile.delta_f > 0:
            wave = _mixer_wave(seg.size, profile.delta_f, buf.sample_rate, start=offset)
            seg = np.where(state, seg * wave, seg)
    else:
        k0, k1 = profile.phase_set
        seg = np.where(state, seg * _rotation(k1, profile.M), seg * _rotation(k0, profile.M))
    seg = seg * np.where(state, profile.gamma_on, profile.gamma_off)
    out[span] = seg
    return buf.with_samples(out)


# -- packet-length control channel --------------------------------------------


@dataclass(frozen=True)
class Burst:
    start_us: float
    duration_us: float


def envelope_detect(buf: IqBuffer, threshold: float, smoothing_us: float) -> list[Burst]:
    """Moving-average magnitude, thresholded into maximal above-threshold runs.

    Noise near the threshold makes the smoothed envelope chatter at burst
    edges. Gaps narrower than the smoothing window are bridged and runs
    narrower than it dropped, since the average cannot form either from a
    real packet boundary.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    width = int(round(smoothing_us * 1e-6 * buf.sample_rate))
    if width < 1:
        raise ValueError("smoothing window is shorter than one sample")
    env = uniform_filter1d(np.abs(buf.samples), size=width, mode="constant")
    above = env > threshold
    if not above.any():
        return []
    edges = np.diff(np.concatenate([[0], above.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    runs: list[list[int]] = []
    for s, e in zip(starts.tolist(), stops.tolist()):
        if runs and s - runs[-1][1] < width:
            runs[-1][1] = e
        else:
            runs.append([s, e])
    us = 1e6 / buf.sample_rate
    return [Burst(s * us, (e - s) * us) for s, e in runs if e - s >= width]


class ControlDecodeError(ValueError):
    pass


@dataclass(frozen=True)
class ControlSymbolMap:
    """Packet durations (microseconds) standing for control bits."""

    entries: tuple = ((100.0, 0), (200.0, 1))
    resolution_us: float = 10.0

    def __post_init__(self):
        durations = [d for d, _ in self.entries]
        if any(b >= a for a, b in zip(durations[1:], durations)):
            raise ValueError("packet durations must be strictly increasing")
        gaps = np.diff(durations)
        if gaps.size and gaps.min() < 2 * self.resolution_us:
            raise ValueError("adjacent durations need a guard gap of at least twice the resolution")

    def duration_of(self, bit: int) -> float:
        for d, b in self.entries:
            if b == bit:
                return d
        raise KeyError(bit)

    def classify(self, duration_us: float) -> int:
        """Control bit whose duration lies nearest and within the guard band."""
        durations = np.array([d for d, _ in self.entries])
        i = int(np.argmin(np.abs(durations - duration_us)))
        gaps = np.diff(durations)
        guard = gaps.min() / 2 if gaps.size else np.inf
        if abs(durations[i] - duration_us) >= guard:
            raise ControlDecodeError(f"burst of {duration_us:.1f} us matches no control symbol")
        return self.entries[i][1]

    def decode(self, bursts: Sequence[Burst]) -> list[int]:
        return [self.classify(b.duration_us) for b in bursts]


def control_frame(
    bits,
    cmap: ControlSymbolMap,
    carrier: IqBuffer,
    gap_us: float = 50.0,
) -> IqBuffer:
    """Packets whose lengths spell ``bits``, cut from a long carrier buffer."""
    fs = carrier.sample_rate
    gap = np.zeros(int(round(gap_us * 1e-6 * fs)), dtype=complex)
    parts, pos = [gap], 0
    for b in as_bits(bits):
        n = int(round(cmap.duration_of(int(b)) * 1e-6 * fs))
        if pos + n > len(carrier):
            raise ValueError("carrier buffer too short for the control frame")
        parts += [carrier.samples[pos : pos + n], gap]
        pos += n
    return IqBuffer(np.concatenate(parts), fs)
