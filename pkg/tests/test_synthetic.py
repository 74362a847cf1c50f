"""Synthetic cost fixtures: closed-form polynomials, shaping, exact models.

The closed-form flop polynomials must agree exactly with the per-column
summation loops in `algorithms` for every kernel; the two were derived
independently, so this is the algebra check for both.
"""

import itertools

import pytest

from perfmodel.algorithms import AlgorithmSpec, generate_trace, kernel_flops
from perfmodel.kernels import get_signature
from perfmodel.store import estimate
from perfmodel.synthetic import (
    DEFAULT_FIXTURE_DOMAIN,
    Ramp,
    Step,
    SyntheticCost,
    _poly_bytes,
    _poly_flops,
    collect_variants,
    make_exact_model,
    synthetic_backend_from_json,
)
from perfmodel.timing import Condition, MachineProfile

_DGEMM_V = get_signature("dgemm").parse_variant("transA=N,transB=N,alpha=1,beta=1")
_DTRSM_V = get_signature("dtrsm").parse_variant("side=L,uplo=L,transA=N,alpha=1")

IC, OC = Condition.IN_CACHE, Condition.OUT_OF_CACHE


# --- closed forms vs summation loops ----------------------------------------------

@pytest.mark.parametrize(
    "kernel,dims,side",
    [
        ("dgemm", 3, None),
        ("dtrsm", 2, "L"),
        ("dtrsm", 2, "R"),
        ("dtrmm", 2, "L"),
        ("dtrmm", 2, "R"),
        ("dsyrk", 2, None),
        ("dpotf2", 1, None),
        ("dcopy", 1, None),
    ],
)
def test_flop_polynomials_match_loop_counts(kernel, dims, side):
    for sizes in itertools.product((1, 2, 5, 17, 40), repeat=dims):
        assert _poly_flops(kernel, sizes, side) == kernel_flops(kernel, sizes, side=side)


def test_qr_panel_flop_polynomials_match_loops():
    # closed forms assume m >= n (k <= n for the T factor)
    for m, n in [(1, 1), (5, 3), (17, 17), (40, 12)]:
        assert _poly_flops("dgeqr2", (m, n), None) == kernel_flops("dgeqr2", (m, n))
    for n, k in [(5, 1), (17, 8), (40, 40)]:
        assert _poly_flops("dlarft", (n, k), None) == kernel_flops("dlarft", (n, k))


def test_byte_polynomials_by_hand():
    assert _poly_bytes("dgemm", (2, 3, 4), None) == 8 * (8 + 12 + 6)
    assert _poly_bytes("dtrsm", (3, 4), "L") == 8 * (9 + 12)
    assert _poly_bytes("dtrsm", (3, 4), "R") == 8 * (16 + 12)
    assert _poly_bytes("dsyrk", (3, 4), None) == 8 * (12 + 9)
    assert _poly_bytes("dpotf2", (4,), None) == 8 * 16
    assert _poly_bytes("dgeqr2", (4, 3), None) == 8 * (12 + 3)
    assert _poly_bytes("dlarft", (5, 2), None) == 8 * (10 + 2 + 4)
    assert _poly_bytes("dcopy", (5,), None) == 80


# --- the roofline cost -------------------------------------------------------------

def test_default_cost_by_hand():
    cost = SyntheticCost()
    # dgemm 8x8x8: 1024 flops / 8 + 1536 bytes / {16,2} + overhead {200,800}
    assert cost("dgemm", _DGEMM_V, IC, (8, 8, 8)) == 128 + 96 + 200
    assert cost("dgemm", _DGEMM_V, OC, (8, 8, 8)) == 128 + 768 + 800


def test_kernel_scale_multiplies_whole_call_cost():
    cost = SyntheticCost(kernel_scale={"dgemm": 2.0})
    assert cost("dgemm", _DGEMM_V, IC, (8, 8, 8)) == 2 * 424
    assert cost("dtrsm", _DTRSM_V, IC, (8, 8)) == SyntheticCost()("dtrsm", _DTRSM_V, IC, (8, 8))


def test_ramp_is_continuous_hinge():
    base = SyntheticCost()
    ramped = SyntheticCost(ramps=(Ramp(dim=0, knee=100, slope=0.5),))
    v, s = _DGEMM_V, (100, 8, 8)
    assert ramped("dgemm", v, IC, s) == base("dgemm", v, IC, s)  # at the knee
    s = (150, 8, 8)
    assert ramped("dgemm", v, IC, s) == base("dgemm", v, IC, s) * 1.25
    s = (50, 8, 8)
    assert ramped("dgemm", v, IC, s) == base("dgemm", v, IC, s)


def test_step_applies_at_threshold_inclusive():
    base = SyntheticCost()
    stepped = SyntheticCost(steps=(Step(dim=1, at=64, factor=3.0),))
    assert stepped("dgemm", _DGEMM_V, IC, (8, 64, 8)) == 3 * base("dgemm", _DGEMM_V, IC, (8, 64, 8))
    assert stepped("dgemm", _DGEMM_V, IC, (8, 56, 8)) == base("dgemm", _DGEMM_V, IC, (8, 56, 8))


def test_shaping_can_target_a_single_kernel():
    stepped = SyntheticCost(steps=(Step(dim=0, at=8, factor=10.0, kernel="dpotf2"),))
    base = SyntheticCost()
    v = get_signature("dpotf2").parse_variant("uplo=L")
    assert stepped("dpotf2", v, IC, (16,)) == 10 * base("dpotf2", v, IC, (16,))
    assert stepped("dgemm", _DGEMM_V, IC, (16, 16, 16)) == base("dgemm", _DGEMM_V, IC, (16, 16, 16))


def test_shaping_dimension_out_of_range_is_ignored():
    shaped = SyntheticCost(
        ramps=(Ramp(dim=2, knee=8, slope=9.0),), steps=(Step(dim=5, at=1, factor=9.0),)
    )
    v = get_signature("dpotf2").parse_variant("uplo=L")
    assert shaped("dpotf2", v, IC, (64,)) == SyntheticCost()("dpotf2", v, IC, (64,))


def test_cost_json_round_trip():
    doc = {
        "flops_per_cycle": 4.0,
        "ic": {"bytes_per_cycle": 32.0, "overhead": 100.0},
        "oc": {"bytes_per_cycle": 1.0, "overhead": 900.0},
        "kernel_scale": {"dpotf2": 3.0},
        "ramps": [{"dim": 0, "knee": 512, "slope": 2.0}],
        "steps": [{"dim": 1, "at": 64, "factor": 1.5, "kernel": "dgemm"}],
    }
    cost = SyntheticCost.from_json(doc)
    assert cost.flops_per_cycle == 4.0
    assert cost.bytes_per_cycle == {"ic": 32.0, "oc": 1.0}
    assert cost.overhead == {"ic": 100.0, "oc": 900.0}
    assert cost.kernel_scale == {"dpotf2": 3.0}
    assert cost.ramps == (Ramp(0, 512, 2.0),)
    assert cost.steps == (Step(1, 64, 1.5, "dgemm"),)
    assert SyntheticCost.from_json({}) == SyntheticCost()


def test_backend_from_json_uses_noise_and_seed():
    be = synthetic_backend_from_json({"noise": 0.01, "seed": 42})
    assert (be.noise, be.seed) == (0.01, 42)
    a = be.collect("dgemm", _DGEMM_V, IC, (8, 8, 8), 5)
    be.reset()
    assert be.collect("dgemm", _DGEMM_V, IC, (8, 8, 8), 5) == a


# --- variant harvesting and exact models ----------------------------------------------

def test_collect_variants_first_seen_order_no_duplicates():
    traces = [
        generate_trace(AlgorithmSpec("chol_alg1", 128, 64)),
        generate_trace(AlgorithmSpec("chol_alg1", 256, 64)),
    ]
    got = collect_variants(traces)
    assert set(got) == {"dtrsm", "dsyrk", "dpotf2"}
    for kernel, variants in got.items():
        canons = [v.canon() for v in variants]
        assert len(canons) == len(set(canons))


def test_make_exact_model_reproduces_cost():
    cost = SyntheticCost(ramps=(Ramp(dim=0, knee=64, slope=1.0),))
    # a ramp is not polynomial: restrict the domain to one side of the knee
    model = make_exact_model(
        "dtrsm", [_DTRSM_V], cost, domains=[((64, 512), (64, 512))],
        machine=MachineProfile(largest_cache_bytes=1 << 20),
    )
    for m in range(64, 513, 64):
        for n in range(64, 513, 64):
            for cond in (IC, OC):
                assert estimate(model, _DTRSM_V, cond, (m, n)) == pytest.approx(
                    cost("dtrsm", _DTRSM_V, cond, (m, n)), rel=1e-9
                )
    assert model.machine.largest_cache_bytes == 1 << 20
    assert model.config["builder"] == "exact"


def test_make_exact_model_default_domain():
    model = make_exact_model("dpotf2", [get_signature("dpotf2").parse_variant("uplo=L")], SyntheticCost())
    vm = model.variant_model("ic", "uplo=L")
    assert vm.domains == [(DEFAULT_FIXTURE_DOMAIN,)]


def test_make_exact_model_split_domains_capture_a_step():
    cost = SyntheticCost(steps=(Step(dim=0, at=120, factor=3.0, kernel="dpotf2"),))
    v = get_signature("dpotf2").parse_variant("uplo=L")
    model = make_exact_model("dpotf2", [v], cost, domains=[((8, 112),), ((120, 448),)])
    for x in (8, 64, 112):
        assert estimate(model, v, "ic", (x,)) == pytest.approx(cost("dpotf2", v, IC, (x,)), rel=1e-9)
    for x in (120, 256, 448):
        assert estimate(model, v, "ic", (x,)) == pytest.approx(cost("dpotf2", v, IC, (x,)), rel=1e-9)
