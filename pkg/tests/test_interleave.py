"""Interleavers against explicit address-walk oracles."""

import numpy as np
import pytest

from lrfhss import interleave


def stride48_read_order(n):
    """Oracle: read addresses start at 0 and advance by 48, wrapping to
    the next start offset when they pass the end of the n*48 buffer."""
    size = 48 * n
    addr, wrap, order = 0, 0, []
    for _ in range(size):
        order.append(addr)
        addr += 48
        if addr >= size:
            wrap += 1
            addr = wrap
    return np.array(order)


def test_header_perm_is_bijection():
    assert sorted(interleave.HEADER_PERM) == list(range(80))


def test_header_perm_order_above_two():
    # applying the permutation twice must not be the identity
    p = interleave.HEADER_PERM
    assert not np.array_equal(p[p], np.arange(80))


def test_header_deinterleave_frozen_positions():
    x = np.arange(80)
    d = interleave.deinterleave_header(x)
    # frozen: output position 0 reads input 0, position 1 reads input 17
    assert d[0] == 0
    assert d[1] == 17
    assert d[9] == 1
    assert d[79] == 64


def test_header_roundtrip():
    rng = np.random.default_rng(2)
    x = rng.normal(size=80)
    assert np.array_equal(
        interleave.deinterleave_header(interleave.interleave_header(x)), x
    )
    assert np.array_equal(
        interleave.interleave_header(interleave.deinterleave_header(x)), x
    )


def test_header_length_checked():
    with pytest.raises(ValueError):
        interleave.interleave_header(np.zeros(79))


@pytest.mark.parametrize("n", [1, 2, 3, 7, 18])
def test_payload_deinterleave_matches_address_walk(n):
    x = np.arange(48 * n)
    assert np.array_equal(
        interleave.deinterleave_payload(x, n), x[stride48_read_order(n)]
    )


def test_payload_single_block_is_identity():
    x = np.arange(48)
    assert np.array_equal(interleave.interleave_payload(x, 1), x)
    assert np.array_equal(interleave.deinterleave_payload(x, 1), x)


@pytest.mark.parametrize("n", [2, 5, 18])
def test_payload_roundtrip(n):
    rng = np.random.default_rng(n)
    x = rng.normal(size=48 * n)
    assert np.array_equal(
        interleave.deinterleave_payload(
            interleave.interleave_payload(x, n), n), x
    )


@pytest.mark.parametrize("n", [2, 9, 18])
def test_payload_blocks_carry_every_nth_bit(n):
    # hop diversity: block q holds coded bits with index == q (mod n)
    x = np.arange(48 * n)
    y = interleave.interleave_payload(x, n)
    for q in range(n):
        block = y[48 * q:48 * (q + 1)]
        assert np.array_equal(block % n, np.full(48, q))


def test_payload_length_checked():
    with pytest.raises(ValueError):
        interleave.interleave_payload(np.zeros(49), 1)
