"""Sorted-array window queries used by the fast double-sum estimators.

All double sums here have the form sum_j w_j sum_i K(arg(Y_j, X_i)) where K
vanishes outside a window that is an interval in X for fixed Y_j. Windows are
located with binary search and padded outward by a few dozen ulps so that every
pair the naive loop would see with a nonzero term is visited; terms are then
evaluated with exactly the same expression as the naive loop.
"""
from __future__ import annotations

import numpy as np

PAIR_CHUNK = 1 << 21


def _pad(v):
    return 64 * np.spacing(np.maximum(np.abs(v), 1.0))


def window_bounds(x_sorted: np.ndarray, lo, hi, outward: bool = True):
    """Index ranges ``[start, stop)`` of sorted ``x`` inside ``[lo, hi]``.

    ``outward`` pads the interval a few ulps outward (superset); otherwise
    inward (subset).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if outward:
        lo, hi = lo - _pad(lo), hi + _pad(hi)
    else:
        lo, hi = lo + _pad(lo), hi - _pad(hi)
    start = np.searchsorted(x_sorted, lo, "left")
    stop = np.searchsorted(x_sorted, hi, "right")
    return start, np.maximum(stop, start)


def ragged_pairs(start: np.ndarray, stop: np.ndarray):
    """Expand per-row index ranges into flat ``(row, col)`` arrays."""
    lengths = stop - start
    total = int(lengths.sum())
    rows = np.repeat(np.arange(start.size), lengths)
    offsets = np.repeat(np.cumsum(lengths) - lengths, lengths)
    cols = np.arange(total) - offsets + np.repeat(start, lengths)
    return rows, cols


def row_chunks(lengths: np.ndarray, limit: int = PAIR_CHUNK):
    """Split rows into consecutive slices whose total pair count stays near ``limit``."""
    if lengths.size == 0:
        return
    cum = np.cumsum(lengths)
    begin = 0
    while begin < lengths.size:
        base = cum[begin - 1] if begin else 0
        end = int(np.searchsorted(cum, base + limit, "right"))
        end = max(end, begin + 1)
        yield slice(begin, end)
        begin = end


def windowed_row_sums(x_sorted, rows_key, term, lo, hi, flat_lo=None, flat_hi=None):
    """For each row j: sum over i in window j of ``term(rows_key[j], x_sorted[i])``.

    ``[lo_j, hi_j]`` bounds the support in x. If ``flat_lo/flat_hi`` are given,
    the term is known to equal exactly 1 there, and those points are counted.
    """
    m = np.size(rows_key)
    out = np.zeros(m)
    if m == 0 or x_sorted.size == 0:
        return out
    start, stop = window_bounds(x_sorted, lo, hi, outward=True)
    segments = []
    if flat_lo is not None:
        fstart, fstop = window_bounds(x_sorted, flat_lo, flat_hi, outward=False)
        fstart = np.clip(fstart, start, stop)
        fstop = np.clip(fstop, fstart, stop)
        out += (fstop - fstart).astype(float)
        segments = [(start, fstart), (fstop, stop)]
    else:
        segments = [(start, stop)]
    for s, e in segments:
        lengths = e - s
        for sl in row_chunks(lengths):
            rows, cols = ragged_pairs(s[sl], e[sl])
            if rows.size == 0:
                continue
            vals = term(rows_key[sl][rows], x_sorted[cols])
            out[sl] += np.bincount(rows, weights=vals, minlength=sl.stop - sl.start)
    return out


def dense_row_sums(x, rows_key, term, chunk_elems: int = 1 << 22):
    """Naive reference: full |rows| x |x| evaluation, chunked over rows."""
    m = np.size(rows_key)
    out = np.zeros(m)
    if m == 0 or x.size == 0:
        return out
    step = max(1, chunk_elems // max(x.size, 1))
    for b in range(0, m, step):
        block = term(rows_key[b:b + step, None], x[None, :])
        out[b:b + step] = block.sum(axis=1)
    return out
