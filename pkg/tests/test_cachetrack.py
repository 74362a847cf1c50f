"""Trace model and backward access-distance scans.

Expected distances on the handmade traces are byte counts worked out by
hand.  Note the scan accumulates every region of every scanned call, so a
distance is the union measure of whole calls, not just the operand's bytes.
``copy_call(n, x, y)`` touches ``[x, x+8n)`` and ``[y, y+8n)``.
"""

import io

import pytest

from perfmodel.cachetrack import (
    AccessDistance,
    KernelCall,
    OperandRegion,
    Termination,
    Trace,
    access_distance,
    dump_trace,
    load_trace,
    lru_resident,
    scan_set,
)
from perfmodel.errors import InvalidOperand
from perfmodel.kernels import get_signature
from perfmodel.regions import RegionSet, vector_region

_DCOPY = get_signature("dcopy").parse_variant("")


def copy_call(n, x_off, y_off):
    return KernelCall(
        "dcopy",
        _DCOPY,
        (n,),
        (
            OperandRegion("x", vector_region(x_off, n)),
            OperandRegion("y", vector_region(y_off, n)),
        ),
    )


def test_distance_is_union_of_scanned_calls():
    # call 0 touches [0,128), call 1 touches [128,256); x of call 2 is
    # [64,128), covered only once call 0 joins the accumulated set [0,256).
    tr = Trace(
        [copy_call(8, 0, 64), copy_call(8, 128, 192), copy_call(8, 64, 256)],
        512,
    )
    r = access_distance(tr, 2, "x", cache_bytes=4096)
    assert r == AccessDistance(2, "x", 256, Termination.FOUND_OPERAND)


def test_distance_exceeds_cache():
    tr = Trace([copy_call(16, 0, 128), copy_call(8, 300, 400)], 512)
    r = access_distance(tr, 1, "x", cache_bytes=100)
    # first scanned call already accumulates 256 bytes > 100
    assert r.terminated_by is Termination.EXCEEDED_CACHE
    assert r.distance == 256


def test_distance_trace_start_uses_footprint():
    tr = Trace([copy_call(8, 0, 64), copy_call(8, 128, 192)], 512)
    r = access_distance(tr, 1, "x", cache_bytes=4096)
    assert r.terminated_by is Termination.TRACE_START
    assert r.distance == 512
    r = access_distance(tr, 1, "x", cache_bytes=4096, footprint=64)
    assert r.distance == 64


def test_operand_found_via_partial_overlaps():
    # x of the last call spans both earlier x vectors; neither call alone
    # covers it, their accumulated union does.
    big = KernelCall(
        "dcopy",
        _DCOPY,
        (16,),
        (
            OperandRegion("x", vector_region(0, 16)),
            OperandRegion("y", vector_region(896, 16)),
        ),
    )
    tr = Trace([copy_call(8, 0, 512), copy_call(8, 64, 640), big], 1024)
    r = access_distance(tr, 2, "x", cache_bytes=4096)
    assert r.terminated_by is Termination.FOUND_OPERAND
    assert r.distance == RegionSet.from_intervals(
        [(64, 64), (640, 64), (0, 64), (512, 64)]
    ).measure


def test_operand_lookup_by_name_and_index():
    call = copy_call(8, 0, 64)
    assert call.operand("y") is call.operands[1]
    assert call.operand(0) is call.operands[0]
    with pytest.raises(InvalidOperand):
        call.operand("z")
    with pytest.raises(InvalidOperand):
        call.operand(5)


def test_scan_argument_validation():
    tr = Trace([copy_call(8, 0, 64)], 512)
    with pytest.raises(IndexError):
        access_distance(tr, 1, "x", cache_bytes=64)
    with pytest.raises(ValueError):
        access_distance(tr, 0, "x", cache_bytes=0)


def test_trace_rejects_region_outside_footprint():
    with pytest.raises(ValueError, match="exceeds trace footprint"):
        Trace([copy_call(8, 0, 480)], 512)


def test_packed_coalesces_adjacent_regions_within_call():
    starts, ends, ptr = Trace([copy_call(8, 0, 64)], 256).packed()
    assert starts.tolist() == [0]
    assert ends.tolist() == [128]
    assert ptr.tolist() == [0, 1]


def test_scan_set_matches_manual_union():
    tr = Trace(
        [copy_call(8, 0, 64), copy_call(8, 128, 192), copy_call(8, 64, 256)],
        512,
    )
    m = scan_set(tr, 2, "x", cache_bytes=4096)
    assert m == RegionSet.from_intervals([(0, 256)])
    assert m.measure == access_distance(tr, 2, "x", cache_bytes=4096).distance


def test_scan_set_trace_start_includes_footprint_region():
    tr = Trace([copy_call(8, 0, 64), copy_call(8, 128, 192)], 512)
    m = scan_set(tr, 1, "x", cache_bytes=4096)
    assert m == RegionSet.from_intervals([(0, 512)])


def test_short_distance_implies_lru_residency():
    # the engine guarantee: distance < cache means the operand is resident
    tr = Trace(
        [
            copy_call(16, 0, 128),
            copy_call(8, 256, 320),
            copy_call(16, 0, 384),
            copy_call(8, 128, 448),
        ],
        512,
    )
    cache = 64 * 6
    checked = 0
    for i in range(1, len(tr)):
        for name in ("x", "y"):
            r = access_distance(tr, i, name, cache)
            if r.terminated_by is Termination.FOUND_OPERAND and r.distance < cache:
                assert lru_resident(tr, i, name, cache)
                checked += 1
    assert checked > 0


def test_lru_warm_replay_differs_from_cold_start():
    # x of call 1 is only touched after call 1 in trace order; a warm replay
    # leaves it resident, a cold start does not.
    tr = Trace([copy_call(8, 128, 192), copy_call(8, 0, 64)], 256)
    assert lru_resident(tr, 1, "x", 4096, warm=True)
    assert not lru_resident(tr, 1, "x", 4096, warm=False)


def test_lru_cache_smaller_than_a_line_never_resident():
    tr = Trace([copy_call(8, 0, 64), copy_call(8, 0, 64)], 256)
    assert not lru_resident(tr, 1, "x", 32)


def test_trace_dump_load_round_trip():
    tr = Trace([copy_call(8, 0, 64), copy_call(16, 128, 256)], 512)
    buf = io.StringIO()
    dump_trace(tr, buf)
    buf.seek(0)
    back = load_trace(buf)
    assert back.total_footprint == tr.total_footprint
    assert len(back) == len(tr)
    for a, b in zip(tr.calls, back.calls):
        assert a.kernel == b.kernel
        assert a.variant.canon() == b.variant.canon()
        assert a.sizes == b.sizes
        assert [(o.name, o.region) for o in a.operands] == [
            (o.name, o.region) for o in b.operands
        ]


def test_trace_load_rejects_bad_schema_and_count():
    tr = Trace([copy_call(8, 0, 64)], 256)
    buf = io.StringIO()
    dump_trace(tr, buf)
    lines = buf.getvalue().splitlines()

    bad = lines[0].replace('"schema": 1', '"schema": 99')
    with pytest.raises(ValueError, match="schema"):
        load_trace(io.StringIO("\n".join([bad] + lines[1:]) + "\n"))

    short = lines[0].replace('"calls": 1', '"calls": 2')
    with pytest.raises(ValueError, match="promises 2 calls"):
        load_trace(io.StringIO("\n".join([short] + lines[1:]) + "\n"))
