"""Adaptive domain partitioning and tensor-polynomial patch fitting.

Grid coordinates and split points asserted below are derived by hand from
the snapping rule (round half up to the nearest multiple of `min_width`,
then clamp and deduplicate) and the integer tie-toward-lo midpoint rule.
"""

import itertools
import math

import numpy as np
import pytest

from perfmodel.errors import DegenerateBox, FitError
from perfmodel.kernels import get_signature
from perfmodel.modeler import (
    ErrorMetric,
    GridKind,
    RefinementConfig,
    accuracy_report,
    eval_patch,
    fit_patch,
    gaussian_grid,
    grid_points_1d,
    lobatto_points,
    owns_point,
    partition_csv,
    refine,
    snapped_axis,
    split_box,
    split_coordinate,
)
from perfmodel.timing import Condition, SyntheticBackend

_DPOTF2 = get_signature("dpotf2")
_V = _DPOTF2.parse_variant("uplo=L")


# --- grids ---------------------------------------------------------------------

def test_lobatto_points_match_cosine_formula():
    got = lobatto_points(5)
    want = [(1 - math.cos(k * math.pi / 4)) / 2 for k in range(5)]
    assert got.tolist() == pytest.approx(want, abs=1e-15)
    assert got[0] == 0.0 and got[-1] == 1.0
    assert got[2] == pytest.approx(0.5)
    assert got[1] == pytest.approx((1 - math.sqrt(2) / 2) / 2)
    with pytest.raises(ValueError):
        lobatto_points(1)


def test_regular_grid_is_linspace():
    assert grid_points_1d(GridKind.REGULAR, 4).tolist() == [0.0, 1 / 3, 2 / 3, 1.0]


def test_boundary_grid_clusters_harder_at_edges():
    g = grid_points_1d(GridKind.BOUNDARY, 5)
    l = lobatto_points(5)
    assert g[1] < l[1] and g[-2] > l[-2]
    assert g[0] == 0.0 and g[-1] == 1.0


def test_snapped_axis_hand_values():
    # 8 + 1016*t for Lobatto t, rounded half-up to the 8-lattice
    got = snapped_axis(8, 1024, 5, 8, GridKind.GAUSSIAN)
    assert got.tolist() == [8, 160, 520, 872, 1024]
    got = snapped_axis(8, 1024, 4, 8, GridKind.GAUSSIAN)
    assert got.tolist() == [8, 264, 768, 1024]


def test_snapped_axis_clamps_off_lattice_endpoints():
    got = snapped_axis(10, 1024, 5, 8, GridKind.GAUSSIAN)
    assert got.tolist() == [10, 160, 520, 872, 1024]


def test_snapped_axis_rejects_degenerate_side():
    with pytest.raises(DegenerateBox):
        snapped_axis(8, 12, 5, 8, GridKind.GAUSSIAN)


def test_gaussian_grid_is_per_dimension():
    axes = gaussian_grid(((8, 1024), (8, 1024)), 5, 8)
    assert len(axes) == 2
    assert axes[0].tolist() == axes[1].tolist() == [8, 160, 520, 872, 1024]


# --- splitting -------------------------------------------------------------------

def test_split_coordinate_hand_values():
    assert split_coordinate(8, 1024, 8) == 512  # exact midpoint 516 -> tie band -> 512
    assert split_coordinate(8, 40, 8) == 24     # exact lattice midpoint
    assert split_coordinate(8, 20, 8) == 16     # midpoint 14 rounds up
    assert split_coordinate(8, 16, 8) == 8      # tie: toward lo


def test_split_box_produces_all_children():
    cfg = RefinementConfig()
    assert split_box(((8, 1024),), cfg) == [((8, 512),), ((512, 1024),)]
    kids = split_box(((8, 1024), (8, 520)), cfg)
    assert len(kids) == 4
    mids = {k[0] for k in kids} | {k[1] for k in kids}
    assert ((8, 512) in mids) and ((264, 520) in mids)


def test_split_box_refuses_small_children():
    cfg = RefinementConfig()  # min_box_side 32
    assert split_box(((8, 64),), cfg) is None
    assert split_box(((8, 1024), (8, 64)), cfg) is None


# --- fitting ---------------------------------------------------------------------

def test_fit_patch_reproduces_exact_cubic():
    pts = np.array([[x] for x in (8, 160, 520, 872, 1024)], dtype=float)
    f = lambda x: 5.0 + 3.0 * x + 0.25 * x**3
    patch = fit_patch(((8, 1024),), pts, f(pts[:, 0]), 3, ErrorMetric.MAX_RELATIVE)
    assert patch.fit_error < 1e-8
    assert eval_patch(patch, (100,)) == pytest.approx(f(100.0), rel=1e-12)


def test_fit_patch_needs_enough_samples_and_rank():
    pts = np.array([[8.0], [16.0]])
    with pytest.raises(FitError, match="samples"):
        fit_patch(((8, 1024),), pts, np.array([1.0, 2.0]), 3, ErrorMetric.MAX_RELATIVE)
    pts = np.array([[8.0], [8.0], [16.0], [16.0]])
    with pytest.raises(FitError, match="rank"):
        fit_patch(((8, 1024),), pts, np.array([1.0, 1.0, 2.0, 2.0]), 3, ErrorMetric.MAX_RELATIVE)


# --- adaptive refinement ------------------------------------------------------------

def cubic_backend():
    return SyntheticBackend(lambda k, v, c, sizes: 5.0 + 3.0 * sizes[0] + 0.25 * sizes[0] ** 3)


def step_backend():
    return SyntheticBackend(lambda k, v, c, sizes: 1600.0 if sizes[0] >= 500 else 1000.0)


def test_refine_polynomial_cost_yields_single_patch():
    patches, stats = refine(
        cubic_backend(), "dpotf2", _V, Condition.IN_CACHE, ((8, 1024),), RefinementConfig()
    )
    assert len(patches) == 1
    assert patches[0].fit_error < 1e-8
    assert (stats.boxes, stats.grid_points) == (1, 5)
    assert stats.measurements == 5 * 15


def test_refine_discontinuity_splits_until_blocked():
    cfg = RefinementConfig()
    patches, stats = refine(
        step_backend(), "dpotf2", _V, Condition.IN_CACHE, ((8, 1024),), cfg
    )
    assert len(patches) > 1
    assert stats.boxes > len(patches)  # interior boxes were sampled too
    for p in patches:
        if p.fit_error > cfg.target_error:
            # only kept un-split because it became unsplittable or too deep
            assert split_box(p.box, cfg) is None or p.depth == cfg.max_depth


def test_refine_patches_tile_the_domain():
    patches, _ = refine(
        step_backend(), "dpotf2", _V, Condition.IN_CACHE, ((8, 1024),), RefinementConfig()
    )
    domain = ((8, 1024),)
    for x in range(8, 1025, 8):
        owners = [p for p in patches if owns_point(p.box, domain, (x,))]
        assert len(owners) == 1, x


def test_refine_interpolating_grid_never_splits():
    # 4 points for 4 cubic coefficients: residuals vanish, error reads zero
    cfg = RefinementConfig(oversample=0, error_metric=ErrorMetric.AVG_RELATIVE)
    assert cfg.points_per_dim == 4
    patches, _ = refine(
        step_backend(), "dpotf2", _V, Condition.IN_CACHE, ((8, 1024),), cfg
    )
    assert len(patches) == 1
    assert patches[0].fit_error < 1e-9


def test_refine_is_deterministic():
    be = SyntheticBackend(
        lambda k, v, c, s: 100.0 + s[0] ** 2 * (1.2 if s[0] > 300 else 1.0),
        noise=0.01,
        seed=5,
    )
    run1, _ = refine(be, "dpotf2", _V, Condition.IN_CACHE, ((8, 1024),), RefinementConfig())
    be.reset()
    run2, _ = refine(be, "dpotf2", _V, Condition.IN_CACHE, ((8, 1024),), RefinementConfig())
    assert run1 == run2


# --- ownership, reports ---------------------------------------------------------------

def test_owns_point_half_open_with_closed_domain_edge():
    domain = ((8, 1024),)
    assert owns_point(((8, 512),), domain, (8,))
    assert not owns_point(((8, 512),), domain, (512,))
    assert owns_point(((512, 1024),), domain, (512,))
    assert owns_point(((512, 1024),), domain, (1024,))
    assert not owns_point(((8, 512),), domain, (4,))


def test_partition_csv_shape():
    patches, _ = refine(
        cubic_backend(), "dpotf2", _V, Condition.IN_CACHE, ((8, 1024),), RefinementConfig()
    )
    csv = partition_csv(patches)
    lines = csv.splitlines()
    assert lines[0] == "box,fit_error,samples"
    assert lines[1].startswith("8:1024,")
    assert lines[1].endswith(",5")


def test_accuracy_report_counts_and_errors():
    rep = accuracy_report(lambda p: 1.5, lambda p: 1.0, [((8, 24),)], stride=8)
    assert rep["points"] == 3
    assert rep["avg_rel_error"] == 0.5
    assert rep["max_rel_error"] == 0.5
    rep = accuracy_report(lambda p: float(sum(p)), lambda p: float(sum(p)), [((8, 64), (8, 64))])
    assert rep["points"] == 64
    assert rep["max_rel_error"] == 0.0


def test_refinement_config_json_round_trip():
    cfg = RefinementConfig(
        min_width=16,
        grid=GridKind.BOUNDARY,
        target_error=0.02,
        min_box_side=64,
        degree=2,
        oversample=2,
        error_metric=ErrorMetric.AVG_RELATIVE,
        max_depth=5,
    )
    assert RefinementConfig.from_json(cfg.to_json()) == cfg
    assert RefinementConfig.from_json({}) == RefinementConfig()
