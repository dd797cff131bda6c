"""Numba kernels for batched genome evaluation and scoring.

Execution shape mirrors a block-per-individual / thread-per-case layout:
the outer loop (or prange) walks individuals, the inner loop walks fitness
cases, and every (individual, case) cell is computed by the same scalar
routine. Sequential and parallel drivers therefore produce bitwise
identical output arrays regardless of thread count.

All kernels run with ``error_model="numpy"`` so division by zero and math
domain errors produce IEEE NaN/inf instead of raising; invalid values are
data here, not errors.

Summation rules are fixed for cross-backend reproducibility: point-to-point
aggregates accumulate int64 in ascending case order; correlation sums use
bottom-up adjacent pairwise summation (see ``_pairwise_sum``).
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from numba import njit, prange

# stale-TBB advisories are noise; numba falls back to another layer anyway
warnings.filterwarnings("ignore", message=".*TBB.*", module=r"numba\..*")

# opcode constants, duplicated from ops.py because numba wants literals
_N_BINARY = 4


@njit(inline="always", error_model="numpy")
def _eval_one(codes, consts, length, x, stack):
    d = 0
    for t in range(length):
        c = codes[t]
        if c < -1:
            stack[d] = x[-2 - c]
            d += 1
        elif c == -1:
            stack[d] = consts[t]
            d += 1
        elif c >= _N_BINARY:
            a = stack[d - 1]
            if c == 4:
                r = a * a
            elif c == 5:
                r = math.sqrt(a)
            elif c == 6:
                r = 1.0 / a
            elif c == 7:
                r = math.cos(a)
            elif c == 8:
                r = math.sin(a)
            elif c == 9:
                r = math.tan(a)
            elif c == 10:
                r = math.acos(a)
            elif c == 11:
                r = math.asin(a)
            elif c == 12:
                r = math.atan(a)
            elif c == 13:
                r = math.tanh(a)
            elif c == 14:
                r = math.log(a)
            else:
                r = math.exp(a)
            stack[d - 1] = r
        else:
            b = stack[d - 1]
            a = stack[d - 2]
            if c == 0:
                r = a + b
            elif c == 1:
                r = a - b
            elif c == 2:
                r = a * b
            else:
                r = a / b
            stack[d - 2] = r
            d -= 1
    return stack[0]


@njit(cache=True, error_model="numpy")
def eval_rows_seq(codes, consts, lengths, inputs, out):
    n_cases = inputs.shape[0]
    for i in range(codes.shape[0]):
        stack = np.empty(codes.shape[1], np.float64)
        length = lengths[i]
        row_codes = codes[i]
        row_consts = consts[i]
        for j in range(n_cases):
            out[i, j] = _eval_one(row_codes, row_consts, length, inputs[j], stack)


@njit(cache=True, parallel=True, error_model="numpy")
def eval_rows_par(codes, consts, lengths, inputs, out):
    n_cases = inputs.shape[0]
    for i in prange(codes.shape[0]):
        stack = np.empty(codes.shape[1], np.float64)
        length = lengths[i]
        row_codes = codes[i]
        row_consts = consts[i]
        for j in range(n_cases):
            out[i, j] = _eval_one(row_codes, row_consts, length, inputs[j], stack)


@njit(inline="always", error_model="numpy")
def _round_half_away(x):
    if x >= 0.0:
        return math.floor(x + 0.5)
    return math.ceil(x - 0.5)


@njit(inline="always", error_model="numpy")
def _ptpt_case(h, y, m_float, m_int, penalty):
    h_ok = math.isfinite(h)
    y_ok = math.isfinite(y)
    if not h_ok:
        if not y_ok:
            return m_int  # both invalid: agreement
        return -m_int
    if not y_ok:
        return -m_int
    ah = abs(h)
    ay = abs(y)
    mx = ah if ah >= ay else ay
    if mx == 0.0:
        return m_int
    mn = ah if ah < ay else ay
    s = m_float * (mn / mx)
    if (h > 0.0 and y < 0.0) or (h < 0.0 and y > 0.0):
        s -= penalty
    return np.int64(_round_half_away(s))


@njit(inline="always", error_model="numpy")
def _ptpt_row(row, targets, m_float, m_int, penalty, res, i):
    total = np.int64(0)
    k1 = 0
    k2 = 0
    for j in range(targets.shape[0]):
        h = row[j]
        y = targets[j]
        h_ok = math.isfinite(h)
        y_ok = math.isfinite(y)
        if h_ok and y_ok:
            total += _ptpt_case(h, y, m_float, m_int, penalty)
        elif h_ok or y_ok:
            total -= m_int
            k1 += 1
        else:
            total += m_int
            k2 += 1
    res[i, 0] = total
    res[i, 1] = k1
    res[i, 2] = k2


@njit(cache=True, error_model="numpy")
def score_ptpt_seq(out, targets, m):
    res = np.empty((out.shape[0], 3), np.int64)
    m_float = float(m)
    m_int = np.int64(m)
    penalty = m_float / 11.0
    for i in range(out.shape[0]):
        _ptpt_row(out[i], targets, m_float, m_int, penalty, res, i)
    return res


@njit(cache=True, parallel=True, error_model="numpy")
def score_ptpt_par(out, targets, m):
    res = np.empty((out.shape[0], 3), np.int64)
    m_float = float(m)
    m_int = np.int64(m)
    penalty = m_float / 11.0
    for i in prange(out.shape[0]):
        _ptpt_row(out[i], targets, m_float, m_int, penalty, res, i)
    return res


@njit(inline="always", error_model="numpy")
def _pairwise_sum(buf, n):
    # bottom-up adjacent pairing; destroys buf[:n]
    while n > 1:
        half = n // 2
        for k in range(half):
            buf[k] = buf[2 * k] + buf[2 * k + 1]
        if n & 1:
            buf[half] = buf[n - 1]
            n = half + 1
        else:
            n = half
    return buf[0]


@njit(inline="always", error_model="numpy")
def _corr_row(row, targets, m_float, res, i, yv, hv, buf):
    n = 0
    k1 = 0
    k2 = 0
    for j in range(targets.shape[0]):
        h = row[j]
        y = targets[j]
        h_ok = math.isfinite(h)
        y_ok = math.isfinite(y)
        if h_ok and y_ok:
            yv[n] = y
            hv[n] = h
            n += 1
        elif h_ok or y_ok:
            k1 += 1
        else:
            k2 += 1
    r2 = 0.0
    if n >= 2:
        for k in range(n):
            buf[k] = yv[k]
        mean_y = _pairwise_sum(buf, n) / n
        for k in range(n):
            buf[k] = hv[k]
        mean_h = _pairwise_sum(buf, n) / n
        for k in range(n):
            d = yv[k] - mean_y
            buf[k] = d * d
        syy = _pairwise_sum(buf, n)
        for k in range(n):
            d = hv[k] - mean_h
            buf[k] = d * d
        shh = _pairwise_sum(buf, n)
        for k in range(n):
            buf[k] = (yv[k] - mean_y) * (hv[k] - mean_h)
        syh = _pairwise_sum(buf, n)
        if syy > 0.0 and shh > 0.0:
            r2 = (syh * syh) / (syy * shh)
            if not (r2 <= 1.0):  # clamp rounding overshoot; NaN from overflow -> 0
                r2 = 1.0 if math.isfinite(r2) else 0.0
    res[i, 0] = m_float * (r2 * r2) * n - m_float * (k1 - k2)
    res[i, 1] = r2
    res[i, 2] = k1
    res[i, 3] = k2


@njit(cache=True, error_model="numpy")
def score_corr_seq(out, targets, m):
    n_cases = targets.shape[0]
    res = np.empty((out.shape[0], 4), np.float64)
    m_float = float(m)
    for i in range(out.shape[0]):
        yv = np.empty(n_cases, np.float64)
        hv = np.empty(n_cases, np.float64)
        buf = np.empty(n_cases, np.float64)
        _corr_row(out[i], targets, m_float, res, i, yv, hv, buf)
    return res


@njit(cache=True, parallel=True, error_model="numpy")
def score_corr_par(out, targets, m):
    n_cases = targets.shape[0]
    res = np.empty((out.shape[0], 4), np.float64)
    m_float = float(m)
    for i in prange(out.shape[0]):
        yv = np.empty(n_cases, np.float64)
        hv = np.empty(n_cases, np.float64)
        buf = np.empty(n_cases, np.float64)
        _corr_row(out[i], targets, m_float, res, i, yv, hv, buf)
    return res


def warm_up() -> None:
    """Compile (or load from cache) every kernel on a tiny input."""
    codes = np.array([[-2]], dtype=np.int16)
    consts = np.zeros((1, 1))
    lengths = np.ones(1, dtype=np.int32)
    inputs = np.ones((2, 1))
    out = np.empty((1, 2))
    eval_rows_seq(codes, consts, lengths, inputs, out)
    eval_rows_par(codes, consts, lengths, inputs, out)
    targets = np.ones(2)
    score_ptpt_seq(out, targets, 1100)
    score_ptpt_par(out, targets, 1100)
    score_corr_seq(out, targets, 1000)
    score_corr_par(out, targets, 1000)
