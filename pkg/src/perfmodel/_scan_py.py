"""Pure-Python (numpy) implementation of the access-distance scan.

This is the fallback twin of the compiled `_scan` extension; both expose the
same functions and must return identical results.  The scan walks a packed
trace backward from a call, accumulating the union M of every scanned call's
byte intervals, and stops when

* the target operand's bytes are fully covered by M (``FOUND``) -- the call
  completing the coverage contributes all of its regions,
* the measure of M exceeds the cache size (``EXCEEDED``, strict >), or
* the trace start is reached (``TRACE_START``), which stands for a previous
  execution of the whole algorithm and yields the total footprint.

Packed traces are three int64 arrays: interval starts, interval ends, and a
per-call pointer array (``call_ptr[i]:call_ptr[i+1]`` slices call i's
intervals, which are sorted, disjoint and coalesced).
"""

from __future__ import annotations

import numpy as np

IMPL = "pure"

FOUND = 0
EXCEEDED = 1
TRACE_START = 2


def _merge(a_starts, a_ends, b_starts, b_ends):
    """Union two coalesced interval lists (arrays sorted by start)."""
    if len(a_starts) == 0:
        return b_starts, b_ends
    if len(b_starts) == 0:
        return a_starts, a_ends
    starts = np.concatenate((a_starts, b_starts))
    ends = np.concatenate((a_ends, b_ends))
    order = np.argsort(starts, kind="stable")
    starts = starts[order]
    ends = ends[order]
    run_end = np.maximum.accumulate(ends)
    breaks = np.flatnonzero(starts[1:] > run_end[:-1]) + 1
    first = np.concatenate(([0], breaks))
    last = np.concatenate((breaks - 1, [len(starts) - 1]))
    return starts[first], run_end[last]


def _subtract(a_starts, a_ends, b_starts, b_ends):
    """Remove the bytes of list b from list a (both coalesced)."""
    out_s: list[int] = []
    out_e: list[int] = []
    nb = len(b_starts)
    j = 0
    for s, e in zip(a_starts.tolist(), a_ends.tolist()):
        while j < nb and b_ends[j] <= s:
            j += 1
        cur = s
        k = j
        while cur < e:
            if k >= nb or b_starts[k] >= e:
                out_s.append(cur)
                out_e.append(e)
                break
            if b_starts[k] > cur:
                out_s.append(cur)
                out_e.append(int(b_starts[k]))
            cur = max(cur, int(b_ends[k]))
            k += 1
    return np.array(out_s, dtype=np.int64), np.array(out_e, dtype=np.int64)


def _intersects(a_starts, a_ends, b_starts, b_ends) -> bool:
    if len(a_starts) == 0 or len(b_starts) == 0:
        return False
    idx = np.searchsorted(b_starts, a_ends, side="left") - 1
    valid = idx >= 0
    if not np.any(valid):
        return False
    return bool(np.any(b_ends[idx[valid]] > a_starts[valid]))


def scan_access_distance(
    tr_starts: np.ndarray,
    tr_ends: np.ndarray,
    call_ptr: np.ndarray,
    op_starts: np.ndarray,
    op_ends: np.ndarray,
    call_index: int,
    cache_bytes: int,
    footprint: int,
) -> tuple[int, int]:
    """Return ``(distance_bytes, termination_code)`` for one operand."""
    m_starts = np.empty(0, dtype=np.int64)
    m_ends = np.empty(0, dtype=np.int64)
    rem_starts = np.asarray(op_starts, dtype=np.int64)
    rem_ends = np.asarray(op_ends, dtype=np.int64)
    measure = 0
    for i in range(call_index - 1, -1, -1):
        lo, hi = int(call_ptr[i]), int(call_ptr[i + 1])
        c_starts = tr_starts[lo:hi]
        c_ends = tr_ends[lo:hi]
        m_starts, m_ends = _merge(m_starts, m_ends, c_starts, c_ends)
        measure = int(np.sum(m_ends - m_starts))
        if len(rem_starts) and _intersects(rem_starts, rem_ends, c_starts, c_ends):
            rem_starts, rem_ends = _subtract(rem_starts, rem_ends, c_starts, c_ends)
        if len(rem_starts) == 0:
            return measure, FOUND
        if measure > cache_bytes:
            return measure, EXCEEDED
    return int(footprint), TRACE_START
