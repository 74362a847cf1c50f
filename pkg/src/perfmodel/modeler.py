"""Adaptive construction of piecewise tensor-product polynomial models.

The size space of a kernel (1 to 3 dimensions) is covered by axis-aligned
boxes.  Each box is sampled on a tensor grid, fitted with a least-squares
polynomial of fixed degree per variable, and split into 2^dims children at
the (rounded) midpoint whenever the fit error exceeds the target and the
children would still be admissible.  The default grid places points at
Chebyshev-Lobatto abscissae ``(1 - cos(k*pi/(p-1))) / 2``, snapped to the
sampling lattice (multiples of `min_width`).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateBox, FitError
from .kernels import VariantKey
from .timing import Backend, Condition, measure

Box = tuple[tuple[int, int], ...]  # ((lo, hi), ...) closed integer intervals


class GridKind(enum.Enum):
    GAUSSIAN = "gaussian"  # Chebyshev-Lobatto abscissae (endpoint-clustered)
    REGULAR = "regular"
    BOUNDARY = "boundary"  # double cosine warp, extra clustering at the edges


class ErrorMetric(enum.Enum):
    MAX_RELATIVE = "max"
    AVG_RELATIVE = "avg"
    MEDIAN_RELATIVE = "median"


@dataclass(frozen=True)
class RefinementConfig:
    min_width: int = 8  # sampling lattice; all grid coords are multiples
    grid: GridKind = GridKind.GAUSSIAN
    target_error: float = 0.05
    min_box_side: int = 32
    degree: int = 3
    oversample: int = 1
    error_metric: ErrorMetric = ErrorMetric.MAX_RELATIVE
    max_depth: int = 8

    @property
    def points_per_dim(self) -> int:
        return self.degree + 1 + self.oversample

    def to_json(self) -> dict:
        return {
            "min_width": self.min_width,
            "grid": self.grid.value,
            "target_error": self.target_error,
            "min_box_side": self.min_box_side,
            "degree": self.degree,
            "oversample": self.oversample,
            "error_metric": self.error_metric.value,
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RefinementConfig":
        kw = dict(doc)
        if "grid" in kw:
            kw["grid"] = GridKind(kw["grid"])
        if "error_metric" in kw:
            kw["error_metric"] = ErrorMetric(kw["error_metric"])
        return cls(**kw)


def lobatto_points(p: int) -> np.ndarray:
    """Chebyshev-Lobatto abscissae on [0, 1]: ``(1 - cos(k pi/(p-1)))/2``."""
    if p < 2:
        raise ValueError("need at least 2 points per dimension")
    k = np.arange(p)
    return (1.0 - np.cos(k * math.pi / (p - 1))) / 2.0


def grid_points_1d(kind: GridKind, p: int) -> np.ndarray:
    """Normalized abscissae on [0, 1] for a grid kind."""
    if kind is GridKind.GAUSSIAN:
        return lobatto_points(p)
    if kind is GridKind.REGULAR:
        return np.linspace(0.0, 1.0, p)
    u = lobatto_points(p)  # BOUNDARY: warp twice for stronger edge clustering
    return (1.0 - np.cos(u * math.pi)) / 2.0


def snapped_axis(lo: int, hi: int, p: int, min_width: int, kind: GridKind) -> np.ndarray:
    """Grid coordinates along one box side, snapped to multiples of `min_width`.

    Coordinates are rounded to the nearest lattice point (half up), clamped to
    ``[lo, hi]``, and deduplicated; the endpoints always survive.
    """
    if hi - lo < min_width:
        raise DegenerateBox(f"box side [{lo}, {hi}] narrower than min_width {min_width}")
    x = lo + grid_points_1d(kind, p) * (hi - lo)
    snapped = np.floor(x / min_width + 0.5).astype(np.int64) * min_width
    snapped = np.clip(snapped, lo, hi)
    return np.unique(snapped)


def gaussian_grid(box: Box, p: int, min_width: int, kind: GridKind = GridKind.GAUSSIAN) -> list[np.ndarray]:
    """Per-dimension snapped coordinates for a box (Cartesian-product grid)."""
    return [snapped_axis(lo, hi, p, min_width, kind) for lo, hi in box]


def _normalize(x: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return 2.0 * (x - lo) / (hi - lo) - 1.0


def _design_matrix(u_cols: list[np.ndarray], degree: int) -> np.ndarray:
    """Tensor-product Vandermonde; column order matches a row-major coeff tensor."""
    n = len(u_cols[0])
    v = np.ones((n, 1))
    for u in u_cols:
        powers = np.vander(u, degree + 1, increasing=True)
        v = (v[:, :, None] * powers[:, None, :]).reshape(n, -1)
    return v


@dataclass(frozen=True)
class PolyPatch:
    """One box of the partition and its fitted polynomial."""

    box: Box
    coeffs: np.ndarray  # shape (degree+1,) * dims, row-major over dims
    fit_error: float
    samples: int  # distinct grid points fitted
    depth: int = 0

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyPatch):
            return NotImplemented
        return (
            self.box == other.box
            and self.coeffs.shape == other.coeffs.shape
            and bool(np.array_equal(self.coeffs, other.coeffs))
            and self.fit_error == other.fit_error
            and self.samples == other.samples
            and self.depth == other.depth
        )


def eval_patch(patch: PolyPatch, point: Sequence[float]) -> float:
    """Evaluate a patch polynomial at a point inside its box."""
    u = [_normalize(np.asarray(float(x)), lo, hi) for x, (lo, hi) in zip(point, patch.box)]
    pv = np.polynomial.polynomial
    dims = len(patch.box)
    if dims == 1:
        return float(pv.polyval(u[0], patch.coeffs))
    if dims == 2:
        return float(pv.polyval2d(u[0], u[1], patch.coeffs))
    return float(pv.polyval3d(u[0], u[1], u[2], patch.coeffs))


def relative_errors(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.abs(truth), np.finfo(float).tiny)
    return np.abs(pred - truth) / denom


def metric_value(errors: np.ndarray, metric: ErrorMetric) -> float:
    if metric is ErrorMetric.MAX_RELATIVE:
        return float(np.max(errors))
    if metric is ErrorMetric.AVG_RELATIVE:
        return float(np.mean(errors))
    return float(np.median(errors))


def fit_patch(
    box: Box,
    points: np.ndarray,
    values: np.ndarray,
    degree: int,
    metric: ErrorMetric,
    depth: int = 0,
) -> PolyPatch:
    """Least-squares tensor polynomial over one box.

    `points` is (N, dims) with every coordinate inside the box; the fit error
    is the chosen metric of the relative residuals at the fitted points.
    """
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dims = len(box)
    u_cols = [_normalize(points[:, d], lo, hi) for d, (lo, hi) in enumerate(box)]
    v = _design_matrix(u_cols, degree)
    ncoef = (degree + 1) ** dims
    if len(values) < ncoef:
        raise FitError(f"{len(values)} samples for {ncoef} coefficients in box {box}")
    coeffs, _, rank, _ = np.linalg.lstsq(v, values, rcond=None)
    if rank < ncoef:
        raise FitError(f"rank-deficient fit ({rank}/{ncoef}) in box {box}")
    err = metric_value(relative_errors(v @ coeffs, values), metric)
    return PolyPatch(
        box=tuple((int(lo), int(hi)) for lo, hi in box),
        coeffs=coeffs.reshape((degree + 1,) * dims),
        fit_error=err,
        samples=len(values),
        depth=depth,
    )


def split_coordinate(lo: int, hi: int, min_width: int) -> int:
    """Midpoint rounded to the lattice, ties toward `lo` (exact integer math)."""
    t2 = lo + hi  # twice the midpoint
    f = (t2 // (2 * min_width)) * min_width
    return f if t2 <= 2 * f + min_width else f + min_width


def split_box(box: Box, cfg: RefinementConfig) -> list[Box] | None:
    """The 2^dims children, or None when any child side would be inadmissible."""
    cuts = []
    for lo, hi in box:
        mid = split_coordinate(lo, hi, cfg.min_width)
        if mid - lo < cfg.min_box_side or hi - mid < cfg.min_box_side:
            return None
        cuts.append(((lo, mid), (mid, hi)))
    return [tuple(combo) for combo in itertools.product(*cuts)]


@dataclass
class RefineStats:
    boxes: int = 0
    grid_points: int = 0
    measurements: int = 0

    def merged(self, other: "RefineStats") -> "RefineStats":
        return RefineStats(
            self.boxes + other.boxes,
            self.grid_points + other.grid_points,
            self.measurements + other.measurements,
        )


def refine(
    backend: Backend,
    kernel: str,
    variant: VariantKey,
    condition: Condition,
    box: Box,
    cfg: RefinementConfig,
    reps: int = 15,
) -> tuple[list[PolyPatch], RefineStats]:
    """Adaptively partition `box` and fit a patch per leaf.

    Patches are returned in deterministic depth-first order and tile the box
    exactly.  Every visited box (leaves and interior) is sampled on its own
    fresh grid.
    """
    box = tuple((int(lo), int(hi)) for lo, hi in box)
    stats = RefineStats()
    patches: list[PolyPatch] = []

    def sample_values(axes: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        pts = np.array(list(itertools.product(*[a.tolist() for a in axes])), dtype=np.int64)
        vals = np.empty(len(pts))
        for i, pt in enumerate(pts):
            vals[i] = measure(backend, kernel, variant, condition, tuple(pt), reps).median_cycles
        return pts, vals

    def visit(b: Box, depth: int) -> None:
        axes = gaussian_grid(b, cfg.points_per_dim, cfg.min_width, cfg.grid)
        pts, vals = sample_values(axes)
        stats.boxes += 1
        stats.grid_points += len(pts)
        stats.measurements += len(pts) * reps
        patch = fit_patch(b, pts, vals, cfg.degree, cfg.error_metric, depth)
        if patch.fit_error > cfg.target_error and depth < cfg.max_depth:
            children = split_box(b, cfg)
            if children is not None:
                for child in children:
                    visit(child, depth + 1)
                return
        patches.append(patch)

    visit(box, 0)
    return patches, stats


def owns_point(patch_box: Box, domain_box: Box, point: Sequence[int]) -> bool:
    """Half-open membership ``[lo, hi)``, closed at the domain's upper edge."""
    for x, (lo, hi), (_, dhi) in zip(point, patch_box, domain_box):
        if x < lo:
            return False
        if x >= hi and not (x == hi == dhi):
            return False
    return True


def partition_csv(patches: Sequence[PolyPatch]) -> str:
    """Partition dump: one row per patch (box, fit error, sample count)."""
    lines = ["box,fit_error,samples"]
    for p in patches:
        box = "x".join(f"{lo}:{hi}" for lo, hi in p.box)
        lines.append(f"{box},{p.fit_error!r},{p.samples}")
    return "\n".join(lines) + "\n"


def accuracy_report(
    estimate_fn: Callable[[tuple[int, ...]], float],
    truth_fn: Callable[[tuple[int, ...]], float],
    boxes: Sequence[Box],
    stride: int = 8,
) -> dict:
    """Relative error of `estimate_fn` against `truth_fn` on a stride grid.

    The grid walks each domain box from lo to hi inclusive in steps of
    `stride` along every dimension.
    """
    errs = []
    for box in boxes:
        axes = [np.arange(lo, hi + 1, stride, dtype=np.int64) for lo, hi in box]
        for pt in itertools.product(*[a.tolist() for a in axes]):
            t = truth_fn(pt)
            e = estimate_fn(pt)
            errs.append(abs(e - t) / max(abs(t), np.finfo(float).tiny))
    errs = np.array(errs)
    return {
        "points": int(errs.size),
        "avg_rel_error": float(np.mean(errs)),
        "max_rel_error": float(np.max(errs)),
    }
