"""Complex-baseband sample buffers and the small set of signal primitives
everything else is built on.

Signals are complex baseband throughout. The passband carrier never appears;
a sample rate travels with every buffer and operations that combine buffers
insist the rates agree.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IQ_MAGIC = b"RWIQ"
_HEADER = struct.Struct("<4sI")


class AliasingError(ValueError):
    """Requested frequency lies at or beyond Nyquist."""


class SampleRateMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IqBuffer:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def time(self) -> np.ndarray:
        """Absolute sample times in seconds, starting at zero."""
        return np.arange(len(self)) / self.sample_rate

    def with_samples(self, samples) -> "IqBuffer":
        return IqBuffer(samples, self.sample_rate)

    def to_bytes(self) -> bytes:
        """Serialize as ``RWIQ`` header + little-endian float32 I/Q pairs."""
        rate = int(round(self.sample_rate))
        if rate != self.sample_rate or not 0 < rate < 2**32:
            raise ValueError("sample rate must be an integer Hz value that fits in 32 bits")
        inter = np.empty(2 * len(self), dtype="<f4")
        inter[0::2] = self.samples.real
        inter[1::2] = self.samples.imag
        return _HEADER.pack(IQ_MAGIC, rate) + inter.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "IqBuffer":
        if len(data) < _HEADER.size:
            raise ValueError("truncated IQ file: missing header")
        magic, rate = _HEADER.unpack_from(data)
        if magic != IQ_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {IQ_MAGIC!r}")
        body = data[_HEADER.size:]
        if len(body) % 8:
            raise ValueError("truncated IQ file: body is not whole I/Q pairs")
        inter = np.frombuffer(body, dtype="<f4").astype(np.float64)
        return cls(inter[0::2] + 1j * inter[1::2], float(rate))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "IqBuffer":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass(frozen=True)
class Spectrum:
    """Two-sided power spectrum; ``power_db`` is power per bin in dB."""

    freqs: np.ndarray
    power_db: np.ndarray
    resolution_hz: float

    @property
    def bins(self) -> list[tuple[float, float]]:
        return list(zip(self.freqs.tolist(), self.power_db.tolist()))

    def total_power(self) -> float:
        return float(np.sum(10.0 ** (self.power_db / 10.0)))

    def peak(self, lo: float = -np.inf, hi: float = np.inf) -> tuple[float, float]:
        """(frequency, power dB) of the strongest bin inside [lo, hi]."""
        mask = (self.freqs >= lo) & (self.freqs <= hi)
        if not mask.any():
            raise ValueError(f"no bins in [{lo}, {hi}] Hz")
        idx = np.flatnonzero(mask)[np.argmax(self.power_db[mask])]
        return float(self.freqs[idx]), float(self.power_db[idx])

    def power_at(self, freq: float) -> float:
        """Power (dB) of the strongest bin within one resolution of ``freq``."""
        return self.peak(freq - self.resolution_hz, freq + self.resolution_hz)[1]


def require_same_rate(*bufs: IqBuffer) -> float:
    rates = {b.sample_rate for b in bufs}
    if len(rates) != 1:
        raise SampleRateMismatch(f"sample rates differ: {sorted(rates)}")
    return rates.pop()


def tone(freq: float, duration: float, sample_rate: float, amplitude: float = 1.0) -> IqBuffer:
    """Complex exponential ``amplitude * exp(j 2 pi freq t)``."""
    if abs(freq) >= sample_rate / 2:
        raise AliasingError(f"|{freq}| Hz is not below Nyquist ({sample_rate / 2} Hz)")
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    return IqBuffer(amplitude * np.exp(2j * np.pi * freq * t), sample_rate)


def power(buf: IqBuffer) -> float:
    if len(buf) == 0:
        raise ValueError("power of an empty buffer is undefined")
    return float(np.mean(np.abs(buf.samples) ** 2))


def spectrum(buf: IqBuffer, resolution_hz: float) -> Spectrum:
    """Averaged-periodogram power spectrum with bin width ``resolution_hz``.

    Segments use a sine window at 50% overlap, whose squared taps sum to one
    across neighbouring segments. The buffer is zero-padded by half a segment
    at both ends so every sample carries the same weight, which makes the bin
    powers sum exactly to ``power(buf)``.
    """
    if resolution_hz <= 0:
        raise ValueError("resolution_hz must be positive")
    nfft = int(round(buf.sample_rate / resolution_hz))
    nfft += nfft % 2
    if len(buf) < nfft:
        raise ValueError(
            f"need at least {nfft} samples for {resolution_hz} Hz resolution, got {len(buf)}"
        )
    hop = nfft // 2
    tail = hop + (-len(buf)) % hop
    x = np.concatenate([np.zeros(hop), buf.samples, np.zeros(tail)])
    nseg = (x.size - nfft) // hop + 1
    win = np.sin(np.pi * (np.arange(nfft) + 0.5) / nfft)
    idx = np.arange(nfft)[None, :] + hop * np.arange(nseg)[:, None]
    segs = np.fft.fft(x[idx] * win, axis=1)
    p = np.sum(np.abs(segs) ** 2, axis=0) / (nfft * len(buf))
    freqs = np.fft.fftshift(np.fft.fftfreq(nfft, d=1.0 / buf.sample_rate))
    p = np.fft.fftshift(p)
    db = 10.0 * np.log10(np.maximum(p, 1e-30))
    return Spectrum(freqs, db, buf.sample_rate / nfft)
