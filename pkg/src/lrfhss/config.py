"""Shared configuration types for the LR-FHSS baseband simulator.

All defaults describe the desk-scale uplink arrangement used throughout the
package: 488.28125 baud GMSK fragments hopping over an occupied channel
width of 39.0625 kHz (80 channels, one per channelizer bin), with hopping
grid spacing of 3.90625 kHz (every 8th channel belongs to the same grid
offset, 10 grid channels per device).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

SYMBOL_RATE = 488.28125  # baud; 2.048 ms symbol period
HEADER_SYMBOLS = 114  # 32 syncword + 80 coded + 2 termination
PAYLOAD_FRAGMENT_SYMBOLS = 50  # 48 coded + 2 termination
PAYLOAD_BLOCK_BITS = 48
SYNCWORD_SYMBOLS = 32
HEADER_CODED_BITS = 80
HEADER_INFO_BITS = 40  # 26 field bits + 8 CRC + 6 zero tail
TAIL_BITS = 6  # flushes the 64-state convolutional encoder

DEFAULT_SYNCWORD = 0x2C0F7995

MAX_PAYLOAD_LEN = 32  # bytes


class CodingRate(enum.Enum):
    """Payload convolutional coding rate (post-puncturing)."""

    R1_3 = "1/3"
    R1_2 = "1/2"
    R2_3 = "2/3"
    R5_6 = "5/6"

    @property
    def fraction(self) -> Fraction:
        num, den = self.value.split("/")
        return Fraction(int(num), int(den))

    @property
    def field_bits(self) -> int:
        """2-bit header encoding of the rate."""
        return _RATE_FIELD[self]

    @classmethod
    def from_field_bits(cls, v: int) -> "CodingRate":
        return _RATE_FIELD_INV[v]

    @classmethod
    def parse(cls, text: str) -> "CodingRate":
        for r in cls:
            if r.value == text:
                return r
        raise ValueError(f"unknown coding rate {text!r}")


_RATE_FIELD = {
    CodingRate.R1_3: 0,
    CodingRate.R1_2: 1,
    CodingRate.R2_3: 2,
    CodingRate.R5_6: 3,
}
_RATE_FIELD_INV = {v: k for k, v in _RATE_FIELD.items()}

# Header replica count when the caller does not override it.  The two
# entries used by the reference link budget are 1/3 -> 3 and 2/3 -> 2; the
# intermediate rates default to the neighbouring values.
DEFAULT_HEADER_REPLICAS = {
    CodingRate.R1_3: 3,
    CodingRate.R1_2: 3,
    CodingRate.R2_3: 2,
    CodingRate.R5_6: 2,
}


@dataclass
class GmskParams:
    """GMSK pulse shaping parameters.

    The phase pulse integrates a Gaussian-filtered rectangular frequency
    pulse and rises monotonically from 0 to exactly 90 degrees over
    ``span`` symbol periods.
    """

    symbol_rate: float = SYMBOL_RATE
    bt: float = 1.0
    span: int = 3  # phase pulse support, in symbols
    osr: int = 4  # default output samples per symbol for gmsk_modulate

    def __post_init__(self):
        if self.span < 2:
            raise ValueError("pulse span must cover at least 2 symbols")
        if self.osr < 2:
            raise ValueError("osr must be >= 2")
        if self.bt <= 0:
            raise ValueError("BT product must be positive")


@dataclass
class PacketConfig:
    """Static link parameters of one LR-FHSS uplink packet."""

    coding_rate: CodingRate = CodingRate.R1_3
    payload_len: int = MAX_PAYLOAD_LEN  # maximum accepted payload, bytes
    n_header_replicas: int = 3
    hop_seed: int = 0
    symbol_rate: float = SYMBOL_RATE
    ocw_hz: float = 39062.5  # occupied channel width
    grid_hz: float = 3906.25  # regulatory hopping grid spacing
    n_channels: int = 80  # physical hopping channels inside the OCW
    n_channels_per_device: int = 10  # grid channels available to one device
    center_freq_hz: float = 940e6  # carrier, metadata only
    syncword: int = DEFAULT_SYNCWORD

    def __post_init__(self):
        if not 1 <= self.payload_len <= MAX_PAYLOAD_LEN:
            raise ValueError("payload_len must be in 1..32 bytes")
        if not 1 <= self.n_header_replicas <= 4:
            raise ValueError("n_header_replicas must be in 1..4")
        if not 0 <= self.hop_seed < 2**11:
            raise ValueError("hop_seed must fit in 11 bits")
        if self.n_channels * self.channel_spacing_hz != self.ocw_hz:
            raise ValueError("ocw_hz must equal n_channels * channel spacing")
        if self.grid_stride * self.n_channels_per_device != self.n_channels:
            raise ValueError(
                "n_channels must equal grid_stride * n_channels_per_device"
            )
        if not 0 <= self.syncword < 2**32:
            raise ValueError("syncword must fit in 32 bits")

    @property
    def channel_spacing_hz(self) -> float:
        return self.ocw_hz / self.n_channels

    @property
    def grid_stride(self) -> int:
        """Channels between adjacent grid positions (8 by default)."""
        return round(self.grid_hz / self.channel_spacing_hz)

    @property
    def header_duration(self) -> float:
        return HEADER_SYMBOLS / self.symbol_rate

    @property
    def fragment_duration(self) -> float:
        return PAYLOAD_FRAGMENT_SYMBOLS / self.symbol_rate

    def fragment_count(self, payload_len: int | None = None) -> int:
        """Number of 48-bit payload fragments for a payload of given size."""
        from .convcode import punctured_length  # local import avoids cycle

        n = self.payload_len if payload_len is None else payload_len
        coded = punctured_length(info_bits_for_payload(n), self.coding_rate)
        return -(-coded // PAYLOAD_BLOCK_BITS)  # ceil division

    def time_on_air(self, payload_len: int | None = None) -> float:
        """Total packet duration in seconds (headers + payload fragments)."""
        n_f = self.fragment_count(payload_len)
        return (
            self.n_header_replicas * self.header_duration
            + n_f * self.fragment_duration
        )


def info_bits_for_payload(payload_len: int) -> int:
    """Encoder input length: payload + CRC-16, plus the 6 zero tail bits."""
    return 8 * (payload_len + 2) + TAIL_BITS


@dataclass
class ImpairmentProfile:
    """Channel impairments applied between transmitter and receiver.

    ``esno_db=None`` disables noise.  ``cfo_hz`` and ``doppler_rate_hz_s``
    are carrier offsets common to the whole packet; ``sto_symbols`` is the
    static sampling-time offset and ``sfo_ppm`` the sampling-frequency
    error.  ``cci_ratio`` is the fraction of hopping blocks hit by an
    equal-power co-channel interferer.
    """

    esno_db: float | None = None
    cfo_hz: float = 0.0
    phase_rad: float = 0.0
    sfo_ppm: float = 0.0
    sto_symbols: float = 0.0
    doppler_rate_hz_s: float = 0.0
    cci_ratio: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.cci_ratio <= 1.0:
            raise ValueError("cci_ratio must be within [0, 1]")


@dataclass
class ChannelizerConfig:
    """FFT channelizer arrangement at the gateway receiver.

    ``fft_size`` bins spaced one symbol rate apart; the input IQ rate must
    equal ``fft_size * bin_spacing_hz``.  Output streams run at 2 samples
    per symbol.  The default 128-point arrangement (62.5 kHz input rate)
    covers the 39 kHz OCW with margin at desk scale; larger power-of-two
    sizes trade CPU for front-end bandwidth.
    """

    fft_size: int = 128
    bin_spacing_hz: float = SYMBOL_RATE
    n_channels: int = 80  # bins actually used for hopping channels
    window: str = "pfb"  # 'pfb' designed prototype or 'hann'
    taps_per_bin: int = 6  # prototype length = taps_per_bin * fft_size

    def __post_init__(self):
        if self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a power of two")
        if self.n_channels > self.fft_size:
            raise ValueError("cannot use more bins than the FFT provides")
        if self.window not in ("pfb", "hann"):
            raise ValueError("window must be 'pfb' or 'hann'")

    @property
    def sample_rate(self) -> float:
        return self.fft_size * self.bin_spacing_hz

    @property
    def output_rate(self) -> float:
        """Per-bin stream rate: 2 samples per symbol."""
        return 2.0 * self.bin_spacing_hz

    @property
    def hop_samples(self) -> int:
        """Input samples consumed per output instant (fft_size / 2)."""
        return self.fft_size // 2

    @property
    def coarse_cfo_step_hz(self) -> float:
        """Frequency resolution of the detector: 2 * bin_spacing / fft_size."""
        return self.output_rate / self.fft_size

    def bin_for_channel(self, channel: int) -> int:
        """FFT bin index of hopping channel ``channel`` (0-based).

        Channels are centered on the band: channel c sits at frequency
        (c - n_channels/2) * bin_spacing relative to the band center.
        """
        if not 0 <= channel < self.n_channels:
            raise ValueError("channel outside configured range")
        return (channel - self.n_channels // 2) % self.fft_size

    def channel_freq_hz(self, channel: int) -> float:
        return (channel - self.n_channels // 2) * self.bin_spacing_hz
