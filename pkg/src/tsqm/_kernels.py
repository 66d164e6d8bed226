"""Monte Carlo trial kernels.

An experiment is packed into flat arrays (see ``PackedSpec``) and each trial
walks the step list: evolve -> matrix product; measure -> inverse-CDF draw
over the Born weights followed by Lüders collapse and a detector-click draw;
the final pseudo-step samples the postselection context.

Complex amplitudes are carried as separate real/imaginary float arrays and
every arithmetic expression is written identically in the numba and numpy
paths, so both backends return bit-identical outcome arrays for the same
``(seed, trial)`` addresses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import HAVE_NUMBA
from .rng import draw_pair, draw_pair_np

EVOLVE = 0
MEASURE = 1
POST = 2


@dataclass(frozen=True)
class PackedSpec:
    kinds: np.ndarray      # (n_steps + 1,) int64, last entry POST
    starts: np.ndarray     # (n_steps + 1,) int64 offset into mats
    counts: np.ndarray     # (n_steps + 1,) int64 number of matrices
    columns: np.ndarray    # (n_steps + 1,) int64 outcome column for MEASURE steps, else -1
    mats_re: np.ndarray    # (M, d, d)
    mats_im: np.ndarray
    efficiency: np.ndarray  # (M,) registration probability per projector
    pre_re: np.ndarray     # (d,)
    pre_im: np.ndarray
    n_measure: int


# -- numba --------------------------------------------------------------------

if HAVE_NUMBA:
    from numba import njit, prange

    @njit(cache=True)
    def _matvec(m_re, m_im, x_re, x_im, out_re, out_im):
        d = x_re.shape[0]
        for r in range(d):
            acc_re = 0.0
            acc_im = 0.0
            for k in range(d):
                acc_re = acc_re + (m_re[r, k] * x_re[k] - m_im[r, k] * x_im[k])
                acc_im = acc_im + (m_re[r, k] * x_im[k] + m_im[r, k] * x_re[k])
            out_re[r] = acc_re
            out_im[r] = acc_im

    @njit(cache=True)
    def _norm2(x_re, x_im):
        acc = 0.0
        for k in range(x_re.shape[0]):
            acc = acc + (x_re[k] * x_re[k] + x_im[k] * x_im[k])
        return acc

    @njit(cache=True)
    def _sample(probs, count, u):
        total = 0.0
        for i in range(count):
            total = total + probs[i]
        target = u * total
        cum = 0.0
        for i in range(count):
            cum = cum + probs[i]
            if target < cum:
                return i
        for i in range(count - 1, -1, -1):
            if probs[i] > 0.0:
                return i
        return 0

    @njit(cache=True)
    def _one_trial(trial, seed_lo, seed_hi, kinds, starts, counts, columns,
                   mats_re, mats_im, efficiency, pre_re, pre_im,
                   outcomes_row, clicks_row):
        d = pre_re.shape[0]
        psi_re = pre_re.copy()
        psi_im = pre_im.copy()
        tmp_re = np.empty(d)
        tmp_im = np.empty(d)
        probs = np.empty(mats_re.shape[0])
        post = -1
        for s in range(kinds.shape[0]):
            kind = kinds[s]
            start = starts[s]
            if kind == EVOLVE:
                _matvec(mats_re[start], mats_im[start], psi_re, psi_im, tmp_re, tmp_im)
                psi_re[:] = tmp_re
                psi_im[:] = tmp_im
                continue
            u, v = draw_pair(seed_lo, seed_hi, trial, s)
            c = counts[s]
            for i in range(c):
                _matvec(mats_re[start + i], mats_im[start + i], psi_re, psi_im, tmp_re, tmp_im)
                probs[i] = _norm2(tmp_re, tmp_im)
            chosen = _sample(probs, c, u)
            if kind == POST:
                post = chosen
                break
            _matvec(mats_re[start + chosen], mats_im[start + chosen], psi_re, psi_im, tmp_re, tmp_im)
            inv = 1.0 / np.sqrt(probs[chosen])
            for k in range(d):
                psi_re[k] = tmp_re[k] * inv
                psi_im[k] = tmp_im[k] * inv
            col = columns[s]
            outcomes_row[col] = chosen
            clicks_row[col] = 1 if v < efficiency[start + chosen] else 0
        return post

    @njit(parallel=True, cache=True)
    def _run_numba(trial_start, n, seed_lo, seed_hi, kinds, starts, counts, columns,
                   mats_re, mats_im, efficiency, pre_re, pre_im, n_measure):
        outcomes = np.full((n, n_measure), -1, dtype=np.int32)
        clicks = np.zeros((n, n_measure), dtype=np.uint8)
        post = np.empty(n, dtype=np.int32)
        for t in prange(n):
            post[t] = _one_trial(trial_start + t, seed_lo, seed_hi, kinds, starts, counts,
                                 columns, mats_re, mats_im, efficiency, pre_re, pre_im,
                                 outcomes[t], clicks[t])
        return outcomes, clicks, post


def run_numba(packed: PackedSpec, trial_start: int, n: int, seed_lo: int, seed_hi: int):
    if not HAVE_NUMBA:  # pragma: no cover
        raise RuntimeError("numba backend requested but numba is not installed")
    p = packed
    return _run_numba(np.int64(trial_start), np.int64(n), np.uint64(seed_lo), np.uint64(seed_hi),
                      p.kinds, p.starts, p.counts, p.columns, p.mats_re, p.mats_im,
                      p.efficiency, p.pre_re, p.pre_im, np.int64(p.n_measure))


# -- numpy fallback -------------------------------------------------------------

def _matvec_np(m_re, m_im, x_re, x_im):
    n, d = x_re.shape
    out_re = np.empty_like(x_re)
    out_im = np.empty_like(x_im)
    for r in range(d):
        acc_re = np.zeros(n)
        acc_im = np.zeros(n)
        for k in range(d):
            acc_re = acc_re + (m_re[r, k] * x_re[:, k] - m_im[r, k] * x_im[:, k])
            acc_im = acc_im + (m_re[r, k] * x_im[:, k] + m_im[r, k] * x_re[:, k])
        out_re[:, r] = acc_re
        out_im[:, r] = acc_im
    return out_re, out_im


def _norm2_np(x_re, x_im):
    acc = np.zeros(x_re.shape[0])
    for k in range(x_re.shape[1]):
        acc = acc + (x_re[:, k] * x_re[:, k] + x_im[:, k] * x_im[:, k])
    return acc


def _sample_np(probs, u):
    """Row-wise inverse CDF; ``probs`` has shape (c, n)."""
    c, n = probs.shape
    total = np.zeros(n)
    for i in range(c):
        total = total + probs[i]
    target = u * total
    chosen = np.full(n, -1, dtype=np.int64)
    cum = np.zeros(n)
    for i in range(c):
        cum = cum + probs[i]
        hit = (chosen < 0) & (target < cum)
        chosen[hit] = i
    missing = chosen < 0
    if missing.any():
        fallback = np.zeros(n, dtype=np.int64)
        for i in range(c):
            fallback[probs[i] > 0.0] = i
        chosen[missing] = fallback[missing]
    return chosen


def run_numpy(packed: PackedSpec, trial_start: int, n: int, seed_lo: int, seed_hi: int):
    p = packed
    trials = np.arange(trial_start, trial_start + n, dtype=np.uint64)
    outcomes = np.full((n, p.n_measure), -1, dtype=np.int32)
    clicks = np.zeros((n, p.n_measure), dtype=np.uint8)
    post = np.full(n, -1, dtype=np.int32)
    psi_re = np.broadcast_to(p.pre_re, (n, p.pre_re.shape[0])).copy()
    psi_im = np.broadcast_to(p.pre_im, (n, p.pre_im.shape[0])).copy()
    rows = np.arange(n)
    for s in range(p.kinds.shape[0]):
        kind = p.kinds[s]
        start = p.starts[s]
        if kind == EVOLVE:
            psi_re, psi_im = _matvec_np(p.mats_re[start], p.mats_im[start], psi_re, psi_im)
            continue
        u, v = draw_pair_np(seed_lo, seed_hi, trials, s)
        c = p.counts[s]
        projected = [_matvec_np(p.mats_re[start + i], p.mats_im[start + i], psi_re, psi_im) for i in range(c)]
        probs = np.stack([_norm2_np(re, im) for re, im in projected])
        chosen = _sample_np(probs, u)
        if kind == POST:
            post[:] = chosen
            break
        proj_re = np.stack([re for re, _ in projected])
        proj_im = np.stack([im for _, im in projected])
        inv = 1.0 / np.sqrt(probs[chosen, rows])
        psi_re = proj_re[chosen, rows] * inv[:, None]
        psi_im = proj_im[chosen, rows] * inv[:, None]
        col = p.columns[s]
        outcomes[:, col] = chosen
        clicks[:, col] = (v < p.efficiency[start + chosen]).astype(np.uint8)
    return outcomes, clicks, post


BACKENDS = {"numba": run_numba, "numpy": run_numpy}
