# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of `_scan_py`: backward access-distance scan over a packed
trace.  Must return bit-identical results to the pure implementation."""

from libc.stdint cimport int64_t
from libc.stdlib cimport free, malloc

IMPL = "compiled"

FOUND = 0
EXCEEDED = 1
TRACE_START = 2

cdef enum:
    C_FOUND = 0
    C_EXCEEDED = 1
    C_TRACE_START = 2


cdef struct IList:
    int64_t * s
    int64_t * e
    Py_ssize_t n


cdef inline int64_t _imax(int64_t a, int64_t b) nogil:
    return a if a > b else b


cdef Py_ssize_t _merge(IList a, const int64_t[::1] bs, const int64_t[::1] be,
                       Py_ssize_t blo, Py_ssize_t bhi, IList * out) nogil:
    """Union of coalesced list `a` and trace slice b[blo:bhi] into `out`.

    Returns the merged length; `out` buffers must hold a.n + (bhi - blo)."""
    cdef Py_ssize_t i = 0, j = blo, k = 0
    cdef int64_t s, e
    while i < a.n or j < bhi:
        if j >= bhi or (i < a.n and a.s[i] <= bs[j]):
            s = a.s[i]; e = a.e[i]; i += 1
        else:
            s = bs[j]; e = be[j]; j += 1
        if k > 0 and s <= out.e[k - 1]:
            out.e[k - 1] = _imax(out.e[k - 1], e)
        else:
            out.s[k] = s; out.e[k] = e; k += 1
    out.n = k
    return k


cdef Py_ssize_t _subtract(IList a, const int64_t[::1] bs, const int64_t[::1] be,
                          Py_ssize_t blo, Py_ssize_t bhi, IList * out) nogil:
    """a minus the trace slice b[blo:bhi], into `out` (coalesced inputs)."""
    cdef Py_ssize_t i, j = blo, k2, k = 0
    cdef int64_t s, e, cur
    for i in range(a.n):
        s = a.s[i]; e = a.e[i]
        while j < bhi and be[j] <= s:
            j += 1
        cur = s
        k2 = j
        while cur < e:
            if k2 >= bhi or bs[k2] >= e:
                out.s[k] = cur; out.e[k] = e; k += 1
                break
            if bs[k2] > cur:
                out.s[k] = cur; out.e[k] = bs[k2]; k += 1
            if be[k2] > cur:
                cur = be[k2]
            k2 += 1
    out.n = k
    return k


cdef bint _intersects(IList a, const int64_t[::1] bs, const int64_t[::1] be,
                      Py_ssize_t blo, Py_ssize_t bhi) nogil:
    cdef Py_ssize_t i = 0, j = blo
    while i < a.n and j < bhi:
        if a.e[i] <= bs[j]:
            i += 1
        elif be[j] <= a.s[i]:
            j += 1
        else:
            return True
    return False


def scan_access_distance(const int64_t[::1] tr_starts not None,
                         const int64_t[::1] tr_ends not None,
                         const int64_t[::1] call_ptr not None,
                         const int64_t[::1] op_starts not None,
                         const int64_t[::1] op_ends not None,
                         Py_ssize_t call_index,
                         int64_t cache_bytes,
                         int64_t footprint):
    """Return ``(distance_bytes, termination_code)`` for one operand."""
    cdef Py_ssize_t cap = tr_starts.shape[0] + op_starts.shape[0] + 4
    cdef int64_t * buf = <int64_t *> malloc(8 * cap * sizeof(int64_t))
    if buf == NULL:
        raise MemoryError()
    cdef IList m, m2, rem, rem2, tmp
    m.s = buf; m.e = buf + cap; m.n = 0
    m2.s = buf + 2 * cap; m2.e = buf + 3 * cap; m2.n = 0
    rem.s = buf + 4 * cap; rem.e = buf + 5 * cap; rem.n = op_starts.shape[0]
    rem2.s = buf + 6 * cap; rem2.e = buf + 7 * cap; rem2.n = 0

    cdef Py_ssize_t i, t, lo, hi
    cdef int64_t measure = 0
    cdef int code = C_TRACE_START
    cdef int64_t result = footprint

    for t in range(rem.n):
        rem.s[t] = op_starts[t]
        rem.e[t] = op_ends[t]

    with nogil:
        for i in range(call_index - 1, -1, -1):
            lo = <Py_ssize_t> call_ptr[i]
            hi = <Py_ssize_t> call_ptr[i + 1]
            _merge(m, tr_starts, tr_ends, lo, hi, &m2)
            tmp = m; m = m2; m2 = tmp
            measure = 0
            for t in range(m.n):
                measure += m.e[t] - m.s[t]
            if rem.n > 0 and _intersects(rem, tr_starts, tr_ends, lo, hi):
                _subtract(rem, tr_starts, tr_ends, lo, hi, &rem2)
                tmp = rem; rem = rem2; rem2 = tmp
            if rem.n == 0:
                code = C_FOUND
                result = measure
                break
            if measure > cache_bytes:
                code = C_EXCEEDED
                result = measure
                break

    free(buf)
    return int(result), int(code)
