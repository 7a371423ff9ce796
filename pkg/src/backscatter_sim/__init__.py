"""Complex-baseband simulator for backscatter over productive commodity carriers."""

from .carrier import FskConfig, PskConfig, modulate, preset
from .channel import ChannelModel
from .iqcore import IqBuffer, power, spectrum, tone
from .receiver import decode_tag_bits, demodulate, search_offset
from .tag import Impedance, TagProfile, embed, mix, phase_delay, reflect, reflection_coefficient

__all__ = [
    "ChannelModel",
    "FskConfig",
    "Impedance",
    "IqBuffer",
    "PskConfig",
    "TagProfile",
    "decode_tag_bits",
    "demodulate",
    "embed",
    "mix",
    "modulate",
    "phase_delay",
    "power",
    "preset",
    "reflect",
    "reflection_coefficient",
    "search_offset",
    "spectrum",
    "tone",
]
