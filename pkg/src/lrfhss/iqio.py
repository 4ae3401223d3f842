"""IQ capture files: raw interleaved samples behind a textual header.

Layout: a fixed-size (128-byte) ASCII header carrying the sample rate
and capture start time, followed by the samples as little-endian 32-bit
floats, interleaved I,Q.  The header is padded with spaces so the
payload always starts at byte 128; an empty capture is a header-only
file.  Writing and re-reading a file reproduces it byte-exactly;
buffers round-trip exactly up to float32 quantization of the samples.
"""

from __future__ import annotations

import numpy as np

from .iqbuf import IqBuffer

HEADER_BYTES = 128
_MAGIC = "LRFHSS-IQ v1"


def _build_header(sample_rate: float, t0: float) -> bytes:
    text = f"{_MAGIC}\nsample_rate={sample_rate!r}\nt0={t0!r}\n"
    raw = text.encode("ascii")
    if len(raw) > HEADER_BYTES:
        raise ValueError("header fields too long for fixed-size header")
    return raw + b" " * (HEADER_BYTES - len(raw))


def _parse_header(raw: bytes) -> tuple[float, float]:
    if len(raw) != HEADER_BYTES:
        raise ValueError(
            f"truncated header: {len(raw)} of {HEADER_BYTES} bytes"
        )
    try:
        lines = raw.decode("ascii").rstrip().split("\n")
    except UnicodeDecodeError as e:
        raise ValueError(f"malformed header: {e}") from e
    if not lines or lines[0] != _MAGIC:
        raise ValueError("malformed header: bad magic")
    fields = {}
    for line in lines[1:]:
        key, _, value = line.strip().partition("=")
        if key:
            fields[key] = value
    try:
        return float(fields["sample_rate"]), float(fields["t0"])
    except (KeyError, ValueError) as e:
        raise ValueError(f"malformed header: {e}") from e


def write_iq(path: str, buf: IqBuffer) -> None:
    """Store a buffer; samples are quantized to float32."""
    flat = np.empty(2 * len(buf), dtype="<f4")
    flat[0::2] = buf.samples.real
    flat[1::2] = buf.samples.imag
    with open(path, "wb") as f:
        f.write(_build_header(buf.sample_rate, buf.t0))
        f.write(flat.tobytes())


def read_iq(path: str) -> IqBuffer:
    """Load a capture written by :func:`write_iq`."""
    with open(path, "rb") as f:
        sample_rate, t0 = _parse_header(f.read(HEADER_BYTES))
        body = f.read()
    if len(body) % 8:
        raise ValueError(
            f"truncated payload: {len(body)} bytes is not a whole "
            "number of I,Q float32 pairs"
        )
    flat = np.frombuffer(body, dtype="<f4")
    samples = flat[0::2].astype(np.float64) \
        + 1j * flat[1::2].astype(np.float64)
    return IqBuffer(samples=samples, sample_rate=sample_rate, t0=t0)
