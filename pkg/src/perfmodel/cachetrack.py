"""Cache-state tracking over kernel call traces.

The central quantity is the *access distance* of an operand at a call: the
number of distinct bytes touched since the operand was last used.  It is
computed by a backward scan that accumulates the union M of all scanned
calls' memory regions and terminates when

1. M covers every byte of the operand (``FOUND_OPERAND``; the terminating
   call contributes all of its regions, so partial touches such as a series
   of column copies accumulate until the whole operand is accounted for),
2. the measure of M exceeds the cache size (``EXCEEDED_CACHE``, strictly
   greater), or
3. the start of the trace is reached (``TRACE_START``): an artificial region
   spanning the whole algorithm footprint is charged, standing for the
   previous execution of the same algorithm.

The operand's own call is never scanned.  An access distance below the cache
size guarantees LRU residency; the reverse direction may misclassify toward
out-of-cache (early exit, whole-call region inclusion), never toward
in-cache.

`lru_resident` is the independent reference: a fully associative LRU cache
simulated at line granularity.  It intentionally bypasses the compiled scan
core so the two routes stay separate.
"""

from __future__ import annotations

import enum
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import _core
from .errors import InvalidOperand
from .kernels import KernelRegistry, VariantKey, registry as default_registry
from .regions import RegionSet

TRACE_SCHEMA = 1


class Termination(enum.Enum):
    FOUND_OPERAND = "found_operand"
    EXCEEDED_CACHE = "exceeded_cache"
    TRACE_START = "trace_start"


_TERMINATION_BY_CODE = {
    _core.FOUND: Termination.FOUND_OPERAND,
    _core.EXCEEDED: Termination.EXCEEDED_CACHE,
    _core.TRACE_START: Termination.TRACE_START,
}


@dataclass(frozen=True)
class OperandRegion:
    """A named operand and the bytes it occupies."""

    name: str
    region: RegionSet


@dataclass(frozen=True)
class KernelCall:
    """One kernel invocation: identity, sizes, and operand byte regions."""

    kernel: str
    variant: VariantKey
    sizes: tuple[int, ...]
    operands: tuple[OperandRegion, ...]

    def operand(self, ref: str | int) -> OperandRegion:
        if isinstance(ref, int):
            try:
                return self.operands[ref]
            except IndexError:
                raise InvalidOperand(f"{self.kernel}: no operand index {ref}") from None
        for op in self.operands:
            if op.name == ref:
                return op
        raise InvalidOperand(f"{self.kernel}: no operand named {ref!r}")

    def region_union(self) -> RegionSet:
        out = RegionSet.empty()
        for op in self.operands:
            out = out.union(op.region)
        return out


class Trace:
    """An ordered list of kernel calls plus the algorithm's total footprint.

    `total_footprint` is the byte size of the algorithm's data arguments
    (all regions of every call must lie inside ``[0, total_footprint)``).
    """

    def __init__(self, calls: Sequence[KernelCall], total_footprint: int):
        self.calls = list(calls)
        self.total_footprint = int(total_footprint)
        for i, call in enumerate(self.calls):
            for op in call.operands:
                if op.region and (
                    op.region.starts[0] < 0 or op.region.ends[-1] > self.total_footprint
                ):
                    raise ValueError(
                        f"call {i} operand {op.name}: region exceeds trace footprint"
                    )
        self._packed: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.calls)

    def __getitem__(self, i: int) -> KernelCall:
        return self.calls[i]

    def packed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(starts, ends, call_ptr) arrays with each call's regions coalesced."""
        if self._packed is None:
            starts_parts: list[np.ndarray] = []
            ends_parts: list[np.ndarray] = []
            ptr = np.zeros(len(self.calls) + 1, dtype=np.int64)
            for i, call in enumerate(self.calls):
                u = call.region_union()
                starts_parts.append(u.starts)
                ends_parts.append(u.ends)
                ptr[i + 1] = ptr[i] + len(u.starts)
            if starts_parts:
                starts = np.concatenate(starts_parts)
                ends = np.concatenate(ends_parts)
            else:
                starts = np.empty(0, dtype=np.int64)
                ends = np.empty(0, dtype=np.int64)
            self._packed = (starts, ends, ptr)
        return self._packed


@dataclass(frozen=True)
class AccessDistance:
    """Result of one backward scan."""

    call_index: int
    operand: str
    distance: int  # bytes
    terminated_by: Termination


def access_distance(
    trace: Trace,
    call_index: int,
    operand: str | int,
    cache_bytes: int,
    *,
    footprint: int | None = None,
) -> AccessDistance:
    """Access distance of one operand of ``trace[call_index]``.

    The scan walks calls ``call_index-1 .. 0``; the call's own regions are
    excluded.  `footprint` overrides the trace's total footprint for the
    artificial trace-start region.
    """
    if not 0 <= call_index < len(trace):
        raise IndexError(f"call index {call_index} outside trace of {len(trace)}")
    if cache_bytes <= 0:
        raise ValueError("cache_bytes must be positive")
    op = trace[call_index].operand(operand)
    if not op.region:
        raise InvalidOperand(f"operand {op.name!r} has an empty region")
    starts, ends, ptr = trace.packed()
    d, code = _core.scan_access_distance(
        starts,
        ends,
        ptr,
        op.region.starts,
        op.region.ends,
        int(call_index),
        int(cache_bytes),
        int(trace.total_footprint if footprint is None else footprint),
    )
    return AccessDistance(call_index, op.name, int(d), _TERMINATION_BY_CODE[code])


def scan_set(trace: Trace, call_index: int, operand: str | int, cache_bytes: int) -> RegionSet:
    """The accumulated region union M of the scan (diagnostic, pure Python).

    Reproduces the scan's termination rules and returns M itself rather than
    its measure; used by tests asserting region-set equality.  At trace start
    the artificial footprint region ``[0, total_footprint)`` is included.
    """
    op = trace[call_index].operand(operand)
    m = RegionSet.empty()
    remaining = op.region
    for i in range(call_index - 1, -1, -1):
        u = trace[i].region_union()
        m = m.union(u)
        remaining = remaining.difference(u)
        if not remaining:
            return m
        if m.measure > cache_bytes:
            return m
    return m.union(RegionSet.from_intervals([(0, trace.total_footprint)]))


def lru_resident(
    trace: Trace,
    call_index: int,
    operand: str | int,
    cache_bytes: int,
    *,
    line_bytes: int = 64,
    warm: bool = True,
) -> bool:
    """Reference check: is the operand fully resident right before its call?

    Simulates a fully associative LRU cache of ``cache_bytes // line_bytes``
    lines over the trace prefix ``[0, call_index)``, touching every line of
    every operand region of each call in order.  With ``warm=True`` (the
    default) the whole trace is replayed once first, mirroring the repeated
    execution under which timings are taken.
    """
    if not 0 <= call_index < len(trace):
        raise IndexError(f"call index {call_index} outside trace of {len(trace)}")
    capacity = cache_bytes // line_bytes
    op = trace[call_index].operand(operand)
    lru: OrderedDict[int, None] = OrderedDict()

    def touch(region: RegionSet) -> None:
        for s, e in zip(region.starts.tolist(), region.ends.tolist()):
            for line in range(s // line_bytes, -(-e // line_bytes)):
                if line in lru:
                    lru.move_to_end(line)
                else:
                    lru[line] = None
                    if len(lru) > capacity:
                        lru.popitem(last=False)

    if capacity <= 0:
        return False
    rounds: list[Iterable[KernelCall]] = []
    if warm:
        rounds.append(trace.calls)
    rounds.append(trace.calls[:call_index])
    for calls in rounds:
        for call in calls:
            for o in call.operands:
                touch(o.region)
    for s, e in zip(op.region.starts.tolist(), op.region.ends.tolist()):
        for line in range(s // line_bytes, -(-e // line_bytes)):
            if line not in lru:
                return False
    return True


def dump_trace(trace: Trace, fh: TextIO) -> None:
    """Write a trace as line-delimited JSON: a header line, then one call per line."""
    header = {
        "schema": TRACE_SCHEMA,
        "total_footprint": trace.total_footprint,
        "calls": len(trace),
    }
    fh.write(json.dumps(header, sort_keys=True) + "\n")
    for i, call in enumerate(trace.calls):
        rec = {
            "index": i,
            "kernel": call.kernel,
            "variant": call.variant.canon(),
            "sizes": list(call.sizes),
            "operands": [
                {"name": op.name, "regions": op.region.intervals()}
                for op in call.operands
            ],
        }
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_trace(fh: TextIO, *, registry: KernelRegistry | None = None) -> Trace:
    """Read a trace written by :func:`dump_trace`."""
    reg = registry or default_registry
    header = json.loads(fh.readline())
    if header.get("schema") != TRACE_SCHEMA:
        raise ValueError(f"unsupported trace schema {header.get('schema')!r}")
    calls = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        sig = reg.get(rec["kernel"])
        calls.append(
            KernelCall(
                kernel=rec["kernel"],
                variant=sig.parse_variant(rec["variant"]),
                sizes=tuple(rec["sizes"]),
                operands=tuple(
                    OperandRegion(o["name"], RegionSet.from_intervals(o["regions"]))
                    for o in rec["operands"]
                ),
            )
        )
    if len(calls) != header["calls"]:
        raise ValueError(f"trace header promises {header['calls']} calls, found {len(calls)}")
    return Trace(calls, header["total_footprint"])
