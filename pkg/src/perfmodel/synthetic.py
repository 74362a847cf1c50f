"""Synthetic cost functions and analytically built models.

The standard synthetic cost is roofline-flavored:

    cycles = flops / flops_per_cycle
           + bytes_touched / bytes_per_cycle[condition]
           + overhead[condition]

with per-kernel scale factors and optional ramps (continuous kinks) or steps
(discontinuities) along size dimensions.  Flops and bytes use closed-form
polynomials per variant, so the base cost is an exact tensor polynomial of
degree <= 3 per size variable: a single cubic patch can represent it with
zero fit error, which makes these costs ideal fixtures.

`make_exact_model` builds such single-patch-per-box models directly, without
adaptive sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .kernels import VariantKey, get_signature
from .modeler import Box, ErrorMetric, fit_patch
from .store import PerfModel, VariantModel
from .timing import Condition, MachineProfile, SyntheticBackend


def _poly_flops(kernel: str, sizes: tuple[int, ...], side: str | None) -> float:
    """Closed-form flop polynomials (QR panel forms assume m >= n)."""
    if kernel == "dgemm":
        m, n, k = sizes
        return 2 * m * n * k
    if kernel in ("dtrsm", "dtrmm"):
        m, n = sizes
        return n * m * m if side == "L" else m * n * n
    if kernel == "dsyrk":
        n, k = sizes
        return n * (n + 1) * k
    if kernel == "dpotf2":
        (n,) = sizes
        return n * (n + 1) * (2 * n + 1) / 6
    if kernel == "dgeqr2":
        m, n = sizes
        s1 = n * (n - 1) / 2
        s2 = (n - 1) * n * (2 * n - 1) / 6
        return n * m * (4 * n - 1) - (4 * n - 1) * s1 - 4 * m * s1 + 4 * s2
    if kernel == "dlarft":
        n, k = sizes
        s1 = k * (k - 1) / 2
        s2 = (k - 1) * k * (2 * k - 1) / 6
        return 2 * n * s1 - s2
    if kernel == "dcopy":
        return 0.0
    raise ValueError(f"no synthetic flop polynomial for {kernel!r}")


def _poly_bytes(kernel: str, sizes: tuple[int, ...], side: str | None) -> float:
    """Operand bytes as polynomials (dgeqr2's tau counted as n)."""
    if kernel == "dgemm":
        m, n, k = sizes
        return 8 * (m * k + k * n + m * n)
    if kernel in ("dtrsm", "dtrmm"):
        m, n = sizes
        sq = m * m if side == "L" else n * n
        return 8 * (sq + m * n)
    if kernel == "dsyrk":
        n, k = sizes
        return 8 * (n * k + n * n)
    if kernel == "dpotf2":
        (n,) = sizes
        return 8 * n * n
    if kernel == "dgeqr2":
        m, n = sizes
        return 8 * (m * n + n)
    if kernel == "dlarft":
        n, k = sizes
        return 8 * (n * k + k + k * k)
    if kernel == "dcopy":
        (n,) = sizes
        return 8 * 2 * n
    raise ValueError(f"no synthetic byte polynomial for {kernel!r}")


@dataclass(frozen=True)
class Ramp:
    """Continuous kink: cost is scaled by ``1 + slope * max(0, x_dim - knee)/knee``.

    With a `kernel`, the ramp applies to that kernel only.
    """

    dim: int
    knee: int
    slope: float
    kernel: str | None = None


@dataclass(frozen=True)
class Step:
    """Discontinuity: cost is scaled by `factor` wherever ``x_dim >= at``.

    With a `kernel`, the step applies to that kernel only.
    """

    dim: int
    at: int
    factor: float
    kernel: str | None = None


@dataclass(frozen=True)
class SyntheticCost:
    """Roofline-flavored synthetic cycle cost; callable as a backend cost_fn."""

    flops_per_cycle: float = 8.0
    bytes_per_cycle: Mapping[str, float] = field(
        default_factory=lambda: {"ic": 16.0, "oc": 2.0}
    )
    overhead: Mapping[str, float] = field(
        default_factory=lambda: {"ic": 200.0, "oc": 800.0}
    )
    kernel_scale: Mapping[str, float] = field(default_factory=dict)
    ramps: tuple[Ramp, ...] = ()
    steps: tuple[Step, ...] = ()

    def __call__(
        self, kernel: str, variant: VariantKey, condition: Condition, sizes: tuple[int, ...]
    ) -> float:
        side = dict(variant.flags).get("side")
        cond = condition.value
        cost = (
            _poly_flops(kernel, sizes, side) / self.flops_per_cycle
            + _poly_bytes(kernel, sizes, side) / self.bytes_per_cycle[cond]
            + self.overhead[cond]
        )
        cost *= self.kernel_scale.get(kernel, 1.0)
        for ramp in self.ramps:
            if ramp.kernel not in (None, kernel):
                continue
            if ramp.dim < len(sizes):
                cost *= 1.0 + ramp.slope * max(0, sizes[ramp.dim] - ramp.knee) / ramp.knee
        for step in self.steps:
            if step.kernel not in (None, kernel):
                continue
            if step.dim < len(sizes) and sizes[step.dim] >= step.at:
                cost *= step.factor
        return cost

    @classmethod
    def from_json(cls, doc: dict) -> "SyntheticCost":
        return cls(
            flops_per_cycle=float(doc.get("flops_per_cycle", 8.0)),
            bytes_per_cycle={
                "ic": float(doc.get("ic", {}).get("bytes_per_cycle", 16.0)),
                "oc": float(doc.get("oc", {}).get("bytes_per_cycle", 2.0)),
            },
            overhead={
                "ic": float(doc.get("ic", {}).get("overhead", 200.0)),
                "oc": float(doc.get("oc", {}).get("overhead", 800.0)),
            },
            kernel_scale={k: float(v) for k, v in doc.get("kernel_scale", {}).items()},
            ramps=tuple(
                Ramp(int(r["dim"]), int(r["knee"]), float(r["slope"]), r.get("kernel"))
                for r in doc.get("ramps", [])
            ),
            steps=tuple(
                Step(int(s["dim"]), int(s["at"]), float(s["factor"]), s.get("kernel"))
                for s in doc.get("steps", [])
            ),
        )


def synthetic_backend_from_json(doc: dict) -> SyntheticBackend:
    """Backend for config documents: ``{"type": "synthetic", "cost": {...}, ...}``."""
    cost = SyntheticCost.from_json(doc.get("cost", {}))
    return SyntheticBackend(
        cost, noise=float(doc.get("noise", 0.0)), seed=int(doc.get("seed", 0))
    )


def collect_variants(traces: Iterable) -> dict[str, list[VariantKey]]:
    """Distinct (kernel, variant) pairs appearing in traces, in first-seen order."""
    out: dict[str, list[VariantKey]] = {}
    for trace in traces:
        for call in trace.calls:
            seen = out.setdefault(call.kernel, [])
            if call.variant not in seen:
                seen.append(call.variant)
    return out


DEFAULT_FIXTURE_DOMAIN = (8, 2048)


def make_exact_model(
    kernel: str,
    variants: Sequence[VariantKey],
    cost_fn,
    *,
    domains: Sequence[Box] | None = None,
    degree: int = 3,
    machine: MachineProfile | None = None,
) -> PerfModel:
    """Fit one patch per (condition, variant, domain box) on a coarse grid.

    Intended for cost functions that are exact tensor polynomials of degree
    <= `degree` per size variable; the patches then carry zero fit error and
    the model reproduces the cost everywhere in the domain.
    """
    sig = get_signature(kernel)
    if domains is None:
        domains = [tuple(DEFAULT_FIXTURE_DOMAIN for _ in range(sig.dims))]
    domains = [tuple((int(lo), int(hi)) for lo, hi in box) for box in domains]
    conditions: dict[str, dict[str, VariantModel]] = {}
    for cond in (Condition.IN_CACHE, Condition.OUT_OF_CACHE):
        per_variant: dict[str, VariantModel] = {}
        for variant in variants:
            vm = VariantModel(domains=list(domains), patches=[], domain_index=[])
            for di, box in enumerate(domains):
                axes = [
                    np.unique(np.linspace(lo, hi, degree + 2).round().astype(np.int64))
                    for lo, hi in box
                ]
                grids = np.meshgrid(*axes, indexing="ij")
                pts = np.stack([g.reshape(-1) for g in grids], axis=1)
                vals = np.array(
                    [cost_fn(kernel, variant, cond, tuple(int(x) for x in pt)) for pt in pts]
                )
                vm.patches.append(
                    fit_patch(box, pts, vals, degree, ErrorMetric.MAX_RELATIVE)
                )
                vm.domain_index.append(di)
            per_variant[variant.canon()] = vm
        conditions[cond.value] = per_variant
    return PerfModel(
        kernel=kernel,
        conditions=conditions,
        machine=machine,
        config={"builder": "exact", "degree": degree},
        meta={"note": "analytically fitted synthetic fixture"},
    )
