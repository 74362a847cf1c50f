"""Byte-interval sets describing the memory footprint of kernel operands.

A :class:`RegionSet` is a sorted list of disjoint, non-adjacent half-open byte
intervals ``[start, end)``.  Column-major sub-matrices map to one interval per
column; the intervals coalesce into a single run when the sub-matrix spans
whole columns of its parent (``rows == ld``).
"""

from __future__ import annotations

from typing import Iterable, Iterator, Tuple

import numpy as np

ELEMENT_BYTES = 8

ByteInterval = Tuple[int, int]  # (offset, length)


def _coalesce(starts: np.ndarray, ends: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge possibly overlapping/adjacent intervals sorted by start."""
    if len(starts) == 0:
        return starts, ends
    run_end = np.maximum.accumulate(ends)
    # a new run begins where the start exceeds the running max end (equality
    # means adjacency, which coalesces)
    breaks = np.flatnonzero(starts[1:] > run_end[:-1]) + 1
    first = np.concatenate(([0], breaks))
    last = np.concatenate((breaks - 1, [len(starts) - 1]))
    return starts[first], run_end[last]


class RegionSet:
    """An immutable set of bytes, stored as coalesced sorted intervals."""

    __slots__ = ("starts", "ends")

    def __init__(self, starts: np.ndarray, ends: np.ndarray, *, _trusted: bool = False):
        starts = np.asarray(starts, dtype=np.int64)
        ends = np.asarray(ends, dtype=np.int64)
        if not _trusted:
            if np.any(ends < starts) or np.any(starts < 0):
                raise ValueError("malformed interval")
            keep = ends > starts
            starts, ends = starts[keep], ends[keep]
            order = np.argsort(starts, kind="stable")
            starts, ends = _coalesce(starts[order], ends[order])
        self.starts = starts
        self.ends = ends

    @classmethod
    def empty(cls) -> "RegionSet":
        z = np.empty(0, dtype=np.int64)
        return cls(z, z, _trusted=True)

    @classmethod
    def from_intervals(cls, intervals: Iterable[ByteInterval]) -> "RegionSet":
        """Build from (offset, length) pairs; zero-length entries are dropped."""
        pairs = [(int(o), int(o) + int(n)) for o, n in intervals if n]
        if not pairs:
            return cls.empty()
        starts, ends = zip(*pairs)
        return cls(np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64))

    def intervals(self) -> list[ByteInterval]:
        """(offset, length) pairs in address order."""
        return [(int(s), int(e - s)) for s, e in zip(self.starts, self.ends)]

    @property
    def measure(self) -> int:
        """Total bytes covered."""
        return int(np.sum(self.ends - self.starts))

    def __len__(self) -> int:
        return len(self.starts)

    def __bool__(self) -> bool:
        return len(self.starts) > 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RegionSet):
            return NotImplemented
        return np.array_equal(self.starts, other.starts) and np.array_equal(self.ends, other.ends)

    def __hash__(self) -> int:
        return hash((self.starts.tobytes(), self.ends.tobytes()))

    def __repr__(self) -> str:
        return f"RegionSet({self.intervals()!r})"

    def __iter__(self) -> Iterator[ByteInterval]:
        return iter(self.intervals())

    def union(self, other: "RegionSet") -> "RegionSet":
        if not other:
            return self
        if not self:
            return other
        starts = np.concatenate((self.starts, other.starts))
        ends = np.concatenate((self.ends, other.ends))
        order = np.argsort(starts, kind="stable")
        s, e = _coalesce(starts[order], ends[order])
        return RegionSet(s, e, _trusted=True)

    __or__ = union

    def intersects(self, other: "RegionSet") -> bool:
        """True iff the two sets share at least one byte."""
        if not self or not other:
            return False
        # for each of our intervals, the candidate partner is the last interval
        # of `other` starting before our end
        idx = np.searchsorted(other.starts, self.ends, side="left") - 1
        valid = idx >= 0
        if not np.any(valid):
            return False
        return bool(np.any(other.ends[idx[valid]] > self.starts[valid]))

    def intersection_measure(self, other: "RegionSet") -> int:
        """Bytes shared with `other`."""
        if not self or not other:
            return 0
        total = 0
        i = j = 0
        a_s, a_e, b_s, b_e = self.starts, self.ends, other.starts, other.ends
        while i < len(a_s) and j < len(b_s):
            lo = max(a_s[i], b_s[j])
            hi = min(a_e[i], b_e[j])
            if hi > lo:
                total += hi - lo
            if a_e[i] <= b_e[j]:
                i += 1
            else:
                j += 1
        return int(total)

    def contains(self, other: "RegionSet") -> bool:
        """True iff every byte of `other` is in this set."""
        return other.measure == self.intersection_measure(other)

    def difference(self, other: "RegionSet") -> "RegionSet":
        """Bytes of this set not in `other`."""
        if not self or not other:
            return self
        out_s: list[int] = []
        out_e: list[int] = []
        j = 0
        b_s, b_e = other.starts, other.ends
        nb = len(b_s)
        for s, e in zip(self.starts.tolist(), self.ends.tolist()):
            cur = s
            while j < nb and b_e[j] <= cur:
                j += 1
            k = j
            while cur < e:
                if k >= nb or b_s[k] >= e:
                    out_s.append(cur)
                    out_e.append(e)
                    break
                if b_s[k] > cur:
                    out_s.append(cur)
                    out_e.append(int(b_s[k]))
                cur = max(cur, int(b_e[k]))
                k += 1
        return RegionSet(np.array(out_s, dtype=np.int64), np.array(out_e, dtype=np.int64), _trusted=True)

    def span(self) -> ByteInterval:
        """(offset, length) of the covering interval; (0, 0) when empty."""
        if not self:
            return (0, 0)
        return (int(self.starts[0]), int(self.ends[-1] - self.starts[0]))


def submatrix_region(
    base: int,
    rows: int,
    cols: int,
    ld: int,
    *,
    element_bytes: int = ELEMENT_BYTES,
) -> RegionSet:
    """Bytes of a column-major ``rows x cols`` sub-matrix at byte offset `base`.

    One interval of ``rows * element_bytes`` per column, stepping
    ``ld * element_bytes``; a single coalesced run when ``rows == ld``.
    """
    if rows < 0 or cols < 0:
        raise ValueError("negative extent")
    if rows == 0 or cols == 0:
        return RegionSet.empty()
    if ld < rows:
        raise ValueError(f"leading dimension {ld} < rows {rows}")
    if rows == ld:
        return RegionSet.from_intervals([(base, rows * cols * element_bytes)])
    starts = base + np.arange(cols, dtype=np.int64) * (ld * element_bytes)
    ends = starts + rows * element_bytes
    return RegionSet(starts, ends, _trusted=True)


def vector_region(base: int, length: int, *, element_bytes: int = ELEMENT_BYTES) -> RegionSet:
    """Bytes of a contiguous vector of `length` elements."""
    if length < 0:
        raise ValueError("negative extent")
    if length == 0:
        return RegionSet.empty()
    return RegionSet.from_intervals([(base, length * element_bytes)])
