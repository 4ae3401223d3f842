"""Soft-output Viterbi sequence detection on the reduced GMSK trellis.

Model
-----
The detector consumes two samples per symbol from the 2 samples/symbol
burst: the symbol-boundary sample at (k+1) Ts and the mid-pulse instant
at (k+1.5) Ts.  After derotating by exp(+j*pi/2*(k-1)), both depend only
on the newest two symbols plus an accumulated-parity term:

    boundary:  psi = a_k * p0 + a_{k-1} * p1 + pi * parity(b_0..b_{k-2})
    instant:   psi = a_k * q0 + a_{k-1} * q1 + pi * parity(b_0..b_{k-2})

with q0 = pi/4 and p0 + p1 = pi/2 exactly.  This gives a 4-state trellis,
state = (previous bit, parity), whose branch references carry both
samples; combining them recovers most of the symbol energy that a
single-sample detector would discard (the channelizer noise is nearly
white at 2 samples/symbol).  For span-3 pulses the reduction is exact up
to the sub-milliradian early tail of the not-yet-started next symbol.

Time-reversed processing (for decoding burst halves outward from a known
anchor) conjugates and reverses the samples.  Reversal also swaps which
boundary sits half a symbol before each instant, so backward pair j
takes its boundary from forward pair K-j and its instant from forward
pair K-1-j (see backward_pairs).  Pulse symmetry then makes the same
boundary weights apply, the partially-risen instant weight q1 saturates
to pi/2, and the data-dependent phase constant reduces to
pi/2 * (segment length mod 2) with the residual pi absorbed by the free
parity state.

Phase handling
--------------
By default the recursion is coherent: the caller wipes its carrier
estimate beforehand (a parametric chirp fit between decode passes is far
more noise-robust at these SNRs than decision-directed tracking).  An
optional third-order per-survivor phase loop remains available for
drift mop-up; its gains default to zero.

Soft outputs
------------
Per-survivor traceback registers of configurable depth implement the
classic soft-output update: at each merge the discarded path's metric
deficit bounds the reliability of every past bit on which the two paths
disagree.  Everything is vectorized over a batch of candidate signals.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

from .config import GmskParams
from .gmsk import boundary_taps, trellis_taps

N_STATES = 4  # (previous bit, parity)
_BIG = 1e30


@dataclass(frozen=True)
class LoopCoeffs:
    """Gains of the optional third-order phase tracking loop."""

    ua: float  # direct phase gain
    ub: float  # frequency-integrator gain
    uc: float  # ramp (Doppler-rate) integrator gain


LOOP_OFF = LoopCoeffs(0.0, 0.0, 0.0)
# narrow-band mop-up for residual drift a parametric fit cannot follow;
# gains chosen to track ~0.5 Hz / 5 Hz/s leftovers without raising the
# error rate at the low per-sample SNRs this detector operates at
TRACKING_LOOP = LoopCoeffs(ua=0.05, ub=0.004, uc=0.0002)


@dataclass
class Trellis:
    """Precomputed transition tables (see _build)."""

    refs: np.ndarray  # (4, 2, 2) branch references, (state, bit, sample)
    prev_state: np.ndarray  # (4, 2) predecessors of each new state
    new_bit: np.ndarray  # (4,) the symbol bit fixed by each new state
    ref_index: np.ndarray  # (4, 2) row into refs.reshape(8, 2) per branch


def _state(prev_bit: int, parity: int) -> int:
    return 2 * prev_bit + parity


@lru_cache(maxsize=8)
def _build(q0: float, q1: float, p0: float, p1: float) -> Trellis:
    refs = np.zeros((N_STATES, 2, 2), dtype=np.complex128)
    for prev_bit in (0, 1):
        for parity in (0, 1):
            for b in (0, 1):
                base = np.pi * parity
                psi_b = (2 * b - 1) * p0 + (2 * prev_bit - 1) * p1 + base
                psi_i = (2 * b - 1) * q0 + (2 * prev_bit - 1) * q1 + base
                refs[_state(prev_bit, parity), b] = (
                    np.exp(1j * psi_b), np.exp(1j * psi_i)
                )
    prev_state = np.zeros((N_STATES, 2), dtype=np.int64)
    new_bit = np.zeros(N_STATES, dtype=np.int64)
    for b in (0, 1):
        for p_new in (0, 1):
            s_new = _state(b, p_new)
            new_bit[s_new] = b
            for i, prev_bit in enumerate((0, 1)):
                prev_state[s_new, i] = _state(prev_bit, p_new ^ prev_bit)
    ref_index = prev_state * 2 + new_bit[:, None]
    return Trellis(refs=refs, prev_state=prev_state, new_bit=new_bit,
                   ref_index=ref_index)


def forward_trellis(gmsk: GmskParams) -> Trellis:
    q0, q1 = trellis_taps(gmsk)
    p0, p1 = boundary_taps(gmsk)
    return _build(q0, q1, p0, p1)


def backward_trellis(gmsk: GmskParams) -> Trellis:
    """Trellis for conjugated, time-reversed sample pairs: the partially
    risen previous-symbol instant weight becomes the saturated pi/2;
    pulse symmetry keeps the boundary weights unchanged."""
    q0, _ = trellis_taps(gmsk)
    p0, p1 = boundary_taps(gmsk)
    return _build(q0, np.pi / 2, p0, p1)


def observation_pairs(burst: np.ndarray, n_steps: int) -> np.ndarray:
    """(boundary, instant) sample pairs for symbols 0..n_steps-1 of a
    burst at 2 samples/symbol: pair k is samples (2k+2, 2k+3)."""
    need = 2 * n_steps + 2
    if burst.shape[-1] < need:
        raise ValueError(f"burst too short: {burst.shape[-1]} < {need}")
    return burst[..., 2: need].reshape(burst.shape[:-1] + (n_steps, 2))


def derotate(samples: np.ndarray, start_index: int = 0,
             axis: int = -1) -> np.ndarray:
    """Remove the +pi/2-per-symbol trellis rotation along ``axis``,
    where element i is symbol index start_index + i.  Use axis=-2 for
    (…, N, 2) sample-pair arrays."""
    k = start_index + np.arange(samples.shape[axis])
    rot = np.exp(1j * (np.pi / 2) * (k - 1))
    shape = [1] * samples.ndim
    shape[axis] = samples.shape[axis]
    return samples * rot.reshape(shape)


def time_reversed(samples: np.ndarray, axis: int = -1) -> np.ndarray:
    """Conjugate-reverse along ``axis`` (backward-run scalar input).
    For sample-pair arrays use backward_pairs instead: plain reversal
    would keep each boundary glued to the wrong instant."""
    return np.conj(np.flip(samples, axis=axis))


def backward_pairs(pairs: np.ndarray, n_steps: int | None = None) -> np.ndarray:
    """Backward-run observation pairs covering reversed symbols
    0..n_steps-1 (forward symbols n_steps-1..0).

    The boundary half a symbol before reversed instant j is the forward
    boundary between symbols K-1-j and K-j, i.e. the boundary of forward
    pair K-j, so

        B[j] = conj([ P[K-j, 0], P[K-1-j, 1] ]),  K = n_steps,

    which needs n_steps + 1 forward pairs.  Decode the result (after
    derotate(…, axis=-2)) on the backward trellis with
    phase_init = pi/2 * (n_steps % 2).
    """
    pairs = np.asarray(pairs)
    if n_steps is None:
        n_steps = pairs.shape[-2] - 1
    if pairs.shape[-2] < n_steps + 1:
        raise ValueError(
            f"need {n_steps + 1} forward pairs, got {pairs.shape[-2]}")
    out = np.stack(
        [np.flip(pairs[..., 1: n_steps + 1, 0], axis=-1),
         np.flip(pairs[..., :n_steps, 1], axis=-1)], axis=-1)
    return np.conj(out)


@dataclass
class SovaResult:
    hard: np.ndarray  # (B, N) int8 decisions
    soft: np.ndarray  # (B, N) signed reliabilities, positive = bit 1
    metric: np.ndarray  # (B,) best final path metric
    phase: np.ndarray  # (B, N) tracked phase per step


def _sova_numpy(r, prev, ref_idx, refs_flat, new_bit, known_bits,
                observed, loop, phase_init, depth):
    """Reference vectorized recursion (see run_sova for semantics)."""
    n_batch, n_steps, _ = r.shape
    pm = np.zeros((n_batch, N_STATES))
    hard_reg = np.zeros((n_batch, N_STATES, depth), dtype=np.int8)
    soft_reg = np.full((n_batch, N_STATES, depth), _BIG)
    age = 0  # valid entries at the right end of the registers

    hard = np.zeros((n_batch, n_steps), dtype=np.int8)
    soft = np.zeros((n_batch, n_steps))
    phases = np.zeros((n_batch, n_steps))

    phi = np.zeros(n_batch) + phase_init
    f_acc = np.zeros(n_batch)
    r_acc = np.zeros(n_batch)
    r_sum = np.zeros(n_batch)
    track = loop.ua != 0.0 or loop.ub != 0.0 or loop.uc != 0.0

    b_idx = np.arange(n_batch)[:, None]
    s_idx = np.arange(N_STATES)[None, :]
    rows = np.arange(n_batch)

    emit_k = 0
    for k in range(n_steps):
        phases[:, k] = phi
        if observed[k]:
            rot = np.exp(-1j * phi)[:, None]
            # sum the boundary and instant correlations per branch
            corr = r[:, k, :] @ np.conj(refs_flat).T  # (B, 8)
            bm8 = np.real(corr * rot)
        else:
            bm8 = np.zeros((n_batch, 8))
        cand = pm[:, prev] + bm8[:, ref_idx].reshape(n_batch, N_STATES, 2)
        if known_bits[k] >= 0:
            mask = new_bit != known_bits[k]
            cand[:, mask, :] -= _BIG
        choice = np.argmax(cand, axis=2)  # (B, 4)
        pm_new = np.take_along_axis(cand, choice[:, :, None], 2)[:, :, 0]
        delta = np.abs(cand[:, :, 0] - cand[:, :, 1])
        win_prev = prev[s_idx, choice]
        lose_prev = prev[s_idx, 1 - choice]

        # shift registers along the winning paths and apply the
        # reliability update where winner and loser history disagree
        hard_win = hard_reg[b_idx, win_prev]
        soft_win = soft_reg[b_idx, win_prev]
        hard_lose = hard_reg[b_idx, lose_prev]
        differ = hard_win != hard_lose
        soft_upd = np.where(differ & (soft_win > delta[:, :, None]),
                            delta[:, :, None], soft_win)

        hard_reg = np.concatenate(
            [hard_win[:, :, 1:],
             np.broadcast_to(new_bit.astype(np.int8),
                             (n_batch, N_STATES))[:, :, None]], axis=2)
        soft_reg = np.concatenate(
            [soft_upd[:, :, 1:],
             np.full((n_batch, N_STATES, 1), _BIG)], axis=2)
        pm = pm_new
        age += 1

        # optional loop update from the winning branch of the best state
        if track and observed[k]:
            s_best = np.argmax(pm, axis=1)
            br = ref_idx.reshape(N_STATES, 2)[s_best, choice[rows, s_best]]
            z = np.sum(r[:, k, :] * np.conj(refs_flat[br]), axis=1)
            perr = np.angle(z * np.exp(-1j * phi))
            r_acc += loop.uc * perr
            r_sum += r_acc
            f_acc += loop.ub * perr
            phi = phi + r_sum + f_acc + loop.ua * perr

        if age >= depth:
            s_best = np.argmax(pm, axis=1)
            hard[:, emit_k] = hard_reg[rows, s_best, 0]
            soft[:, emit_k] = soft_reg[rows, s_best, 0]
            emit_k += 1

    # flush the remaining register contents from the best final state
    s_best = np.argmax(pm, axis=1)
    tail = min(depth - 1, n_steps - emit_k)
    take = depth - tail
    if tail > 0:
        hard[:, emit_k:] = hard_reg[rows, s_best, take:]
        soft[:, emit_k:] = soft_reg[rows, s_best, take:]

    signed = np.minimum(soft, _BIG) * (2.0 * hard - 1.0)
    return hard, signed, pm[rows, s_best], phases


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _sova_kernel(r, prev, ref_idx, refs_conj, new_bit, known_bits,
                     observed, ua, ub, uc, phi0, depth):
        n_batch, n_steps, _ = r.shape
        track = ua != 0.0 or ub != 0.0 or uc != 0.0

        hard = np.zeros((n_batch, n_steps), dtype=np.int8)
        soft = np.zeros((n_batch, n_steps))
        phases = np.zeros((n_batch, n_steps))
        metric = np.zeros(n_batch)

        for b in range(n_batch):
            pm = np.zeros(N_STATES)
            pm_new = np.zeros(N_STATES)
            hard_reg = np.zeros((N_STATES, depth), dtype=np.int8)
            soft_reg = np.full((N_STATES, depth), _BIG)
            hard_nxt = np.zeros((N_STATES, depth), dtype=np.int8)
            soft_nxt = np.zeros((N_STATES, depth))
            choice = np.zeros(N_STATES, dtype=np.int64)
            bm8 = np.zeros(8)
            phi = phi0[b]
            f_acc = 0.0
            r_acc = 0.0
            r_sum = 0.0
            age = 0
            emit_k = 0

            for k in range(n_steps):
                phases[b, k] = phi
                if observed[k]:
                    rot = np.exp(-1j * phi)
                    z0 = r[b, k, 0] * rot
                    z1 = r[b, k, 1] * rot
                    for m in range(8):
                        bm8[m] = (z0 * refs_conj[m, 0]).real + \
                                 (z1 * refs_conj[m, 1]).real
                else:
                    for m in range(8):
                        bm8[m] = 0.0

                for s in range(N_STATES):
                    c0 = pm[prev[s, 0]] + bm8[ref_idx[s, 0]]
                    c1 = pm[prev[s, 1]] + bm8[ref_idx[s, 1]]
                    if known_bits[k] >= 0 and new_bit[s] != known_bits[k]:
                        c0 -= _BIG
                        c1 -= _BIG
                    ch = 1 if c1 > c0 else 0
                    choice[s] = ch
                    pm_new[s] = c1 if ch else c0
                    delta = abs(c0 - c1)
                    win = prev[s, ch]
                    lose = prev[s, 1 - ch]
                    for d in range(depth - 1):
                        hw = hard_reg[win, d + 1]
                        sw = soft_reg[win, d + 1]
                        if hw != hard_reg[lose, d + 1] and sw > delta:
                            sw = delta
                        hard_nxt[s, d] = hw
                        soft_nxt[s, d] = sw
                    hard_nxt[s, depth - 1] = np.int8(new_bit[s])
                    soft_nxt[s, depth - 1] = _BIG

                for s in range(N_STATES):
                    pm[s] = pm_new[s]
                    for d in range(depth):
                        hard_reg[s, d] = hard_nxt[s, d]
                        soft_reg[s, d] = soft_nxt[s, d]
                age += 1

                s_best = 0
                for s in range(1, N_STATES):
                    if pm[s] > pm[s_best]:
                        s_best = s

                if track and observed[k]:
                    m = ref_idx[s_best, choice[s_best]]
                    z = (r[b, k, 0] * refs_conj[m, 0]
                         + r[b, k, 1] * refs_conj[m, 1])
                    perr = np.angle(z * np.exp(-1j * phi))
                    r_acc += uc * perr
                    r_sum += r_acc
                    f_acc += ub * perr
                    phi = phi + r_sum + f_acc + ua * perr

                if age >= depth:
                    hard[b, emit_k] = hard_reg[s_best, 0]
                    soft[b, emit_k] = soft_reg[s_best, 0]
                    emit_k += 1

            s_best = 0
            for s in range(1, N_STATES):
                if pm[s] > pm[s_best]:
                    s_best = s
            tail = min(depth - 1, n_steps - emit_k)
            take = depth - tail
            for d in range(tail):
                hard[b, emit_k + d] = hard_reg[s_best, take + d]
                soft[b, emit_k + d] = soft_reg[s_best, take + d]
            metric[b] = pm[s_best]

        signed = np.minimum(soft, _BIG) * (2.0 * hard - 1.0)
        return hard, signed, metric, phases


def run_sova(
    r: np.ndarray,
    trellis: Trellis,
    loop: LoopCoeffs = LOOP_OFF,
    known_bits: np.ndarray | None = None,
    observed: np.ndarray | None = None,
    phase_init: np.ndarray | float = 0.0,
    depth: int = 32,
    force_numpy: bool = False,
) -> SovaResult:
    """Batched per-survivor detection over (B, N, 2) derotated sample
    pairs (a single (N, 2) burst is promoted to a batch of one).

    known_bits: (N,) with -1 for unknown positions, else the fixed bit.
    observed: (N,) bools; False steps contribute no metric and freeze the
    loop (used for instants that fall outside the captured burst).
    All survivors start with equal metrics, which absorbs the parity
    (global pi) ambiguity and any unknown entering symbol.

    A compiled kernel handles the recursion when numba is importable;
    ``force_numpy`` selects the plain-numpy reference path (the two are
    equivalent and tested against each other).
    """
    r = np.asarray(r, dtype=np.complex128)
    if r.ndim == 2:
        r = r[None, :, :]
    if r.ndim != 3 or r.shape[-1] != 2:
        raise ValueError("r must have shape (batch, steps, 2)")
    n_batch, n_steps, _ = r.shape
    if known_bits is None:
        known_bits = np.full(n_steps, -1, dtype=np.int64)
    known_bits = np.asarray(known_bits, dtype=np.int64)
    if observed is None:
        observed = np.ones(n_steps, dtype=bool)
    observed = np.asarray(observed, dtype=bool)

    prev = trellis.prev_state  # (4, 2)
    ref_idx = trellis.ref_index  # (4, 2)
    refs_flat = trellis.refs.reshape(-1, 2)  # (8, 2)

    if _HAVE_NUMBA and not force_numpy:
        phi0 = np.zeros(n_batch) + phase_init
        hard, signed, metric, phases = _sova_kernel(
            np.ascontiguousarray(r), prev, ref_idx,
            np.conj(refs_flat), trellis.new_bit, known_bits, observed,
            loop.ua, loop.ub, loop.uc, phi0, depth,
        )
    else:
        hard, signed, metric, phases = _sova_numpy(
            r, prev, ref_idx.reshape(-1), refs_flat, trellis.new_bit,
            known_bits, observed, loop, phase_init, depth,
        )
    return SovaResult(hard=hard, soft=signed, metric=metric, phase=phases)
