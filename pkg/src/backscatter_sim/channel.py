"""AWGN channel with SNR referenced to the unmodified carrier.

Noise comes from numpy's PCG64 generator. Per-trial streams are derived with
``numpy.random.SeedSequence`` from the sweep seed and the trial coordinates,
so parallel and serial runs draw identical noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .iqcore import IqBuffer, power, require_same_rate


@dataclass(frozen=True)
class ChannelModel:
    snr_db: float = math.inf
    reference_power: Optional[float] = None
    leak_gain: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.leak_gain <= 1:
            raise ValueError("leak_gain must lie in [0, 1]")
        if self.reference_power is not None and self.reference_power <= 0:
            raise ValueError("reference_power must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must be a number or +inf")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr_db) and self.snr_db > 0

    def noise_variance(self, carrier_ref: Optional[IqBuffer] = None) -> float:
        if self.noiseless:
            return 0.0
        p = self.reference_power
        if p is None:
            if carrier_ref is None or len(carrier_ref) == 0:
                raise ValueError("a finite SNR needs a non-empty carrier reference")
            p = power(carrier_ref)
        return p / 10 ** (self.snr_db / 10)


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for the given (seed, key...) coordinates."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def complex_awgn(rng: np.random.Generator, n: int, variance: float) -> np.ndarray:
    """Circularly symmetric complex Gaussian noise, E|w|^2 = variance."""
    scale = math.sqrt(variance / 2)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def apply(buf: IqBuffer, carrier_ref: IqBuffer, model: ChannelModel) -> IqBuffer:
    """buf + leak_gain * carrier_ref + noise, noise keyed to the carrier's power."""
    require_same_rate(buf, carrier_ref)
    out = buf.samples.copy()
    if model.leak_gain:
        if len(carrier_ref) != len(buf):
            raise ValueError("direct-path leakage needs a carrier reference of equal length")
        out = out + model.leak_gain * carrier_ref.samples
    if not model.noiseless:
        var = model.noise_variance(carrier_ref)
        out = out + complex_awgn(rng_for(model.seed), out.size, var)
    return buf.with_samples(out)
