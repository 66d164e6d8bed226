"""Philox4x32-10 counter-based generator.

A trial's random stream is addressed by ``(seed, trial, draw)``: the 64-bit
seed forms the key and the counter is ``(draw, trial_lo, trial_hi, 0)``.
Any trial can therefore be regenerated in isolation, which is what makes
ensemble runs independent of scheduling.

Two implementations share the exact integer arithmetic: a scalar one that
numba compiles into the trial kernel, and a vectorized numpy one operating
on arrays of trial indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import HAVE_NUMBA

if HAVE_NUMBA:
    from numba import njit
else:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

MASK32 = 0xFFFFFFFF
_M0 = 0xD2511F53
_M1 = 0xCD9E8D57
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
ROUNDS = 10
_TWO_POW_M53 = 1.0 / 9007199254740992.0


def split_seed(seed: int) -> tuple[int, int]:
    s = int(seed) % (1 << 64)
    return s & MASK32, s >> 32


@njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """One Philox4x32-10 block; all arguments are uint32 values held in uint64."""
    m = np.uint64(MASK32)
    m0 = np.uint64(_M0)
    m1 = np.uint64(_M1)
    w0 = np.uint64(_W0)
    w1 = np.uint64(_W1)
    s32 = np.uint64(32)
    for _ in range(ROUNDS):
        p0 = m0 * c0
        p1 = m1 * c2
        hi0 = p0 >> s32
        lo0 = p0 & m
        hi1 = p1 >> s32
        lo1 = p1 & m
        c0, c1, c2, c3 = (hi1 ^ c1 ^ k0) & m, lo1, (hi0 ^ c3 ^ k1) & m, lo0
        k0 = (k0 + w0) & m
        k1 = (k1 + w1) & m
    return c0, c1, c2, c3


@njit(cache=True)
def uniform53(x0, x1):
    """Map two 32-bit words to a double in [0, 1) with 53 random bits."""
    a = np.float64(x0 >> np.uint64(5))
    b = np.float64(x1 >> np.uint64(6))
    return (a * 67108864.0 + b) * _TWO_POW_M53


@njit(cache=True)
def draw_pair(seed_lo, seed_hi, trial, draw):
    """Two independent uniforms for one ``(trial, draw)`` address."""
    t = np.uint64(trial)
    m = np.uint64(MASK32)
    x0, x1, x2, x3 = philox4x32(np.uint64(draw), t & m, t >> np.uint64(32), np.uint64(0),
                                np.uint64(seed_lo), np.uint64(seed_hi))
    return uniform53(x0, x1), uniform53(x2, x3)


def philox4x32_np(c0, c1, c2, c3, k0, k1):
    """Vectorized block function over uint64 arrays (values < 2**32)."""
    m = np.uint64(MASK32)
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    for _ in range(ROUNDS):
        p0 = np.uint64(_M0) * c0
        p1 = np.uint64(_M1) * c2
        c0, c1, c2, c3 = (
            ((p1 >> np.uint64(32)) ^ c1 ^ k0) & m,
            p1 & m,
            ((p0 >> np.uint64(32)) ^ c3 ^ k1) & m,
            p0 & m,
        )
        k0 = (k0 + np.uint64(_W0)) & m
        k1 = (k1 + np.uint64(_W1)) & m
    return c0, c1, c2, c3


def uniform53_np(x0, x1):
    a = (x0 >> np.uint64(5)).astype(np.float64)
    b = (x1 >> np.uint64(6)).astype(np.float64)
    return (a * 67108864.0 + b) * _TWO_POW_M53


def draw_pair_np(seed_lo: int, seed_hi: int, trials: np.ndarray, draw: int):
    t = np.asarray(trials, dtype=np.uint64)
    zero = np.zeros_like(t)
    x0, x1, x2, x3 = philox4x32_np(zero + np.uint64(draw), t & np.uint64(MASK32),
                                   t >> np.uint64(32), zero, seed_lo, seed_hi)
    return uniform53_np(x0, x1), uniform53_np(x2, x3)


@dataclass(frozen=True)
class TrialStream:
    """Random stream of a single trial: ``uniforms(draw)`` is a pure function."""

    seed: int
    trial: int

    def uniforms(self, draw: int) -> tuple[float, float]:
        lo, hi = split_seed(self.seed)
        u, v = draw_pair_np(lo, hi, np.array([self.trial]), draw)
        return float(u[0]), float(v[0])
