"""LR-FHSS baseband simulator.

Bit-accurate transmitter, LEO channel impairment model, robust
synchronization receiver and Aloha MAC abstraction for 488 baud GMSK
frequency-hopping uplinks.
"""

from .config import (
    ChannelizerConfig,
    CodingRate,
    GmskParams,
    ImpairmentProfile,
    PacketConfig,
)

__all__ = [
    "ChannelizerConfig",
    "CodingRate",
    "GmskParams",
    "ImpairmentProfile",
    "PacketConfig",
]

__version__ = "0.1.0"
