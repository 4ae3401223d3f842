"""Rate-1/3 constraint-length-7 convolutional code with puncturing.

The mother code uses generators 133, 171, 165 (octal).  All four payload
rates are punctured views of the same encoder; the header uses the 1/2
pattern.  Soft values follow the sign convention used throughout the
package: positive means bit 1, magnitude is reliability, exactly zero is
an erasure.
"""

from __future__ import annotations

import numpy as np

from .config import CodingRate

GENERATORS = (0o133, 0o171, 0o165)
CONSTRAINT_LEN = 7
N_STATES = 64

# Puncture masks, row-major over (info bit within period, generator).
# 1/2 keeps the classic 133/171 pair; 2/3 and 5/6 follow the standard
# puncturing of that pair, never emitting the third generator.
PUNCTURE_MASKS = {
    CodingRate.R1_3: np.array([1, 1, 1], dtype=bool),
    CodingRate.R1_2: np.array([1, 1, 0], dtype=bool),
    CodingRate.R2_3: np.array([1, 1, 0, 1, 0, 0], dtype=bool),
    CodingRate.R5_6: np.array(
        [1, 1, 0, 0, 1, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0], dtype=bool
    ),
}


def _taps(gen: int) -> np.ndarray:
    return np.array(
        [(gen >> (CONSTRAINT_LEN - 1 - i)) & 1 for i in range(CONSTRAINT_LEN)],
        dtype=np.uint8,
    )


TAPS = np.stack([_taps(g) for g in GENERATORS])  # (3, 7), newest bit first


def puncture_period(rate: CodingRate) -> int:
    """Info bits per puncturing period."""
    return PUNCTURE_MASKS[rate].size // 3


def padded_info_len(n_info: int, rate: CodingRate) -> int:
    """Encoder input length after zero-padding to the puncture period."""
    p = puncture_period(rate)
    return -(-n_info // p) * p


def punctured_length(n_info: int, rate: CodingRate) -> int:
    """Coded bits surviving puncturing for ``n_info`` input bits (padded)."""
    mask = PUNCTURE_MASKS[rate]
    return padded_info_len(n_info, rate) // puncture_period(rate) * int(
        mask.sum()
    )


def conv_encode(bits) -> np.ndarray:
    """Encode with the rate-1/3 mother code from the all-zero state.

    The caller is responsible for terminating the trellis (the frame layer
    always appends 6 zero tail bits), so the output is exactly
    ``3 * len(bits)`` with the three generator outputs interleaved per
    input bit.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("expected a 1-D bit array")
    out = np.empty((bits.size, 3), dtype=np.uint8)
    for g in range(3):
        out[:, g] = np.convolve(bits, TAPS[g])[: bits.size] & 1
    return out.reshape(-1)


def puncture(coded, rate: CodingRate) -> np.ndarray:
    """Drop coded bits according to the rate's puncture mask."""
    coded = np.asarray(coded)
    mask = PUNCTURE_MASKS[rate]
    if coded.size % mask.size:
        raise ValueError(
            f"coded length {coded.size} not a multiple of the "
            f"puncture period ({mask.size} coded bits)"
        )
    return coded.reshape(-1, mask.size)[:, mask].reshape(-1)


def depuncture(soft, rate: CodingRate) -> np.ndarray:
    """Re-insert punctured positions as zero-valued (erased) soft bits."""
    soft = np.asarray(soft, dtype=np.float64)
    mask = PUNCTURE_MASKS[rate]
    kept = int(mask.sum())
    if soft.size % kept:
        raise ValueError(
            f"soft length {soft.size} not a multiple of {kept} kept bits"
        )
    out = np.zeros((soft.size // kept, mask.size), dtype=np.float64)
    out[:, mask] = soft.reshape(-1, kept)
    return out.reshape(-1)


def _transition_tables():
    """Predecessor states and branch output signs for the 64-state trellis.

    State encodes the six most recent input bits, newest in the MSB.
    ``prev[s, p]`` is the predecessor reached by dropping the newest bit of
    ``s`` and prepending old bit ``p``; the input bit of every branch into
    ``s`` is the MSB of ``s``.
    """
    states = np.arange(N_STATES)
    prev = np.empty((N_STATES, 2), dtype=np.int64)
    prev[:, 0] = (states & 31) << 1
    prev[:, 1] = ((states & 31) << 1) | 1
    newest = states >> 5
    signs = np.empty((N_STATES, 2, 3), dtype=np.float64)
    for p in range(2):
        reg = (newest << 6) | prev[:, p]  # 7-bit register, newest at MSB
        for g in range(3):
            gen = GENERATORS[g]
            bits = np.zeros(N_STATES, dtype=np.int64)
            for i in range(CONSTRAINT_LEN):
                if (gen >> (CONSTRAINT_LEN - 1 - i)) & 1:
                    bits ^= (reg >> (CONSTRAINT_LEN - 1 - i)) & 1
            signs[:, p, g] = 2.0 * bits - 1.0
    return prev, signs


PREV_STATES, BRANCH_SIGNS = _transition_tables()


def viterbi_decode(soft, n_info: int) -> tuple[np.ndarray, float]:
    """Maximum-likelihood sequence decode of the rate-1/3 mother code.

    Args:
        soft: depunctured soft bits, length ``3 * n_info``; positive means
            coded bit 1, zeros are erasures.
        n_info: number of information bits to recover (including any tail).

    Returns:
        (decoded bits, path metric of the winning survivor).  Traceback
        starts from the state with the largest final path metric.
    """
    soft = np.asarray(soft, dtype=np.float64)
    if soft.size != 3 * n_info:
        raise ValueError("soft input must contain 3 values per info bit")
    r = soft.reshape(n_info, 3)
    pm = np.full(N_STATES, -np.inf)
    pm[0] = 0.0  # encoder starts flushed
    backptr = np.empty((n_info, N_STATES), dtype=np.uint8)
    for k in range(n_info):
        cand = pm[PREV_STATES] + BRANCH_SIGNS @ r[k]  # (64, 2)
        backptr[k] = np.argmax(cand, axis=1)
        pm = cand[np.arange(N_STATES), backptr[k]]
    state = int(np.argmax(pm))
    bits = np.empty(n_info, dtype=np.uint8)
    for k in range(n_info - 1, -1, -1):
        bits[k] = state >> 5
        state = int(PREV_STATES[state, backptr[k, state]])
    return bits, float(np.max(pm))
