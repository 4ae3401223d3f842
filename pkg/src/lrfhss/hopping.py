"""Deterministic frequency-hopping channel sequences.

A device owns one grid offset (seed mod grid_stride) and hops over the
``n_channels_per_device`` channels of that offset, never repeating the
channel of the previous block.  The generator is reproducible from
(seed, block count) alone, which is all the receiver learns from a
decoded header.  Transmitters built to a different grammar will not
interoperate; both ends of this simulator share this one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PacketConfig


@dataclass
class HopPlan:
    """Channel index per hopping block, in transmission order."""

    channel_indices: np.ndarray
    seed: int
    grid_offset: int

    def __len__(self) -> int:
        return self.channel_indices.size


def device_channel_set(config: PacketConfig, seed: int) -> np.ndarray:
    """The grid channels available to the device with this seed."""
    stride = config.grid_stride
    offset = seed % stride
    return offset + stride * np.arange(config.n_channels_per_device)


def hop_sequence(config: PacketConfig, n_blocks: int,
                 seed: int | None = None) -> HopPlan:
    """Generate the hopping plan for one packet.

    Consecutive blocks always use distinct channels; every channel of the
    device's set is drawn uniformly in the long run.
    """
    seed = config.hop_seed if seed is None else seed
    if not 0 <= seed < 2**11:
        raise ValueError("hop seed must fit in 11 bits")
    if n_blocks < 1:
        raise ValueError("need at least one block")
    channels = device_channel_set(config, seed)
    n_set = channels.size
    rng = np.random.default_rng(seed)
    picks = np.empty(n_blocks, dtype=np.int64)
    picks[0] = rng.integers(0, n_set)
    # uniform over the n_set - 1 channels that differ from the previous one
    steps = rng.integers(1, n_set, size=n_blocks - 1) if n_blocks > 1 else []
    for k in range(1, n_blocks):
        picks[k] = (picks[k - 1] + steps[k - 1]) % n_set
    return HopPlan(
        channel_indices=channels[picks],
        seed=seed,
        grid_offset=seed % config.grid_stride,
    )
