"""Performance-model container, evaluation, and canonical persistence.

One model covers one kernel: for each cache condition and variant it holds a
piecewise-polynomial partition of one or more domain boxes.  Evaluation is
lookup (half-open box ownership, closed at the domain's upper edge) plus a
polynomial evaluation, clamped below at zero; points outside every domain box
raise, the model never extrapolates.

Files are a single canonical JSON document per kernel: keys sorted,
fixed separators, one trailing newline, and floats rendered by Python's
shortest round-trip ``repr``.  Saving the same model twice yields
byte-identical files, and ``load(save(m)) == m`` exactly (binary64 survives
the decimal round trip).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ModelFormatError, OutOfDomain, UnknownVariant, VersionError
from .kernels import VariantKey, get_signature
from .modeler import (
    Box,
    PolyPatch,
    RefineStats,
    RefinementConfig,
    eval_patch,
    owns_point,
    refine,
)
from .timing import Backend, Condition, MachineProfile

MODEL_SCHEMA = 1


@dataclass
class VariantModel:
    """The partition for one (condition, variant) pair."""

    domains: list[Box]
    patches: list[PolyPatch]
    domain_index: list[int]  # patch i lies inside domains[domain_index[i]]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VariantModel):
            return NotImplemented
        return (
            self.domains == other.domains
            and self.patches == other.patches
            and self.domain_index == other.domain_index
        )


@dataclass
class PerfModel:
    """All fitted timing behavior of one kernel on one machine."""

    kernel: str
    conditions: dict[str, dict[str, VariantModel]]  # "ic"/"oc" -> canon variant -> partition
    machine: MachineProfile | None = None
    config: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def variant_model(self, condition: Condition | str, variant: VariantKey | str) -> VariantModel:
        cond = condition.value if isinstance(condition, Condition) else str(condition)
        canon = variant.canon() if isinstance(variant, VariantKey) else str(variant)
        try:
            return self.conditions[cond][canon]
        except KeyError:
            known = sorted(self.conditions.get(cond, {}))
            raise UnknownVariant(
                f"{self.kernel}: no {cond} model for variant {canon!r}; known: {known}"
            ) from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PerfModel):
            return NotImplemented
        return (
            self.kernel == other.kernel
            and self.conditions == other.conditions
            and self.machine == other.machine
            and self.config == other.config
            and self.meta == other.meta
        )


def estimate(
    model: PerfModel,
    variant: VariantKey | str,
    condition: Condition | str,
    point: Sequence[int],
) -> float:
    """Predicted cycles at an integer size point (no extrapolation)."""
    vm = model.variant_model(condition, variant)
    point = tuple(int(x) for x in point)
    for i, patch in enumerate(vm.patches):
        dbox = vm.domains[vm.domain_index[i]]
        if len(point) != len(patch.box):
            raise OutOfDomain(
                f"{model.kernel}: point {point} has {len(point)} dims, model has {len(patch.box)}",
                point=point,
            )
        if owns_point(patch.box, dbox, point):
            return max(0.0, eval_patch(patch, point))
    raise OutOfDomain(
        f"{model.kernel}: point {point} outside model domain {vm.domains}", point=point
    )


# ---------------------------------------------------------------------------
# building

def build_model(
    backend: Backend,
    kernel: str,
    variants: Sequence[VariantKey],
    domains: Sequence[Box],
    cfg: RefinementConfig,
    reps: int = 15,
    *,
    conditions: Sequence[Condition] = (Condition.IN_CACHE, Condition.OUT_OF_CACHE),
    machine: MachineProfile | None = None,
    backend_id: str | None = None,
    stamp: str | None = None,
) -> PerfModel:
    """Refine every (condition, variant, domain box) and assemble the model."""
    get_signature(kernel)  # validate the kernel id early
    cond_map: dict[str, dict[str, VariantModel]] = {}
    total = RefineStats()
    for cond in conditions:
        per_variant: dict[str, VariantModel] = {}
        for variant in variants:
            vm = VariantModel(domains=[tuple(map(tuple, d)) for d in domains], patches=[], domain_index=[])
            for di, dbox in enumerate(vm.domains):
                patches, stats = refine(backend, kernel, variant, cond, dbox, cfg, reps)
                vm.patches.extend(patches)
                vm.domain_index.extend([di] * len(patches))
                total = total.merged(stats)
            per_variant[variant.canon()] = vm
        cond_map[cond.value] = per_variant
    meta = {
        "boxes_visited": total.boxes,
        "grid_points": total.grid_points,
        "total_measurements": total.measurements,
        "reps": reps,
    }
    if backend_id:
        meta["backend"] = backend_id
    if stamp:
        meta["created"] = stamp
    return PerfModel(
        kernel=kernel,
        conditions=cond_map,
        machine=machine,
        config=cfg.to_json(),
        meta=meta,
    )


# ---------------------------------------------------------------------------
# persistence

def _patch_to_json(patch: PolyPatch, domain_index: int) -> dict:
    return {
        "box": [[int(lo), int(hi)] for lo, hi in patch.box],
        "degree": patch.degree,
        "coeffs": [float(c) for c in patch.coeffs.reshape(-1)],
        "fit_error": float(patch.fit_error),
        "samples": int(patch.samples),
        "depth": int(patch.depth),
        "domain": domain_index,
    }


def _patch_from_json(doc: dict) -> tuple[PolyPatch, int]:
    box = tuple((int(lo), int(hi)) for lo, hi in doc["box"])
    degree = int(doc["degree"])
    coeffs = np.array(doc["coeffs"], dtype=np.float64).reshape((degree + 1,) * len(box))
    patch = PolyPatch(
        box=box,
        coeffs=coeffs,
        fit_error=float(doc["fit_error"]),
        samples=int(doc["samples"]),
        depth=int(doc.get("depth", 0)),
    )
    return patch, int(doc.get("domain", 0))


def to_json_doc(model: PerfModel) -> dict:
    conditions = {}
    for cond, per_variant in model.conditions.items():
        conditions[cond] = {
            canon: {
                "domains": [[[int(lo), int(hi)] for lo, hi in box] for box in vm.domains],
                "patches": [
                    _patch_to_json(p, di) for p, di in zip(vm.patches, vm.domain_index)
                ],
            }
            for canon, vm in per_variant.items()
        }
    doc = {
        "schema": MODEL_SCHEMA,
        "kernel": model.kernel,
        "config": model.config,
        "meta": model.meta,
        "conditions": conditions,
    }
    if model.machine is not None:
        doc["machine"] = model.machine.to_json()
    return doc


def from_json_doc(doc: dict) -> PerfModel:
    if not isinstance(doc, dict) or "schema" not in doc:
        raise ModelFormatError("not a model document (no schema field)")
    if doc["schema"] != MODEL_SCHEMA:
        raise VersionError(f"unsupported model schema {doc['schema']!r} (want {MODEL_SCHEMA})")
    conditions: dict[str, dict[str, VariantModel]] = {}
    for cond, per_variant in doc["conditions"].items():
        conditions[cond] = {}
        for canon, vdoc in per_variant.items():
            domains = [tuple((int(lo), int(hi)) for lo, hi in box) for box in vdoc["domains"]]
            patches = []
            index = []
            for pdoc in vdoc["patches"]:
                patch, di = _patch_from_json(pdoc)
                patches.append(patch)
                index.append(di)
            conditions[cond][canon] = VariantModel(domains, patches, index)
    machine = MachineProfile.from_json(doc["machine"]) if "machine" in doc else None
    return PerfModel(
        kernel=doc["kernel"],
        conditions=conditions,
        machine=machine,
        config=doc.get("config", {}),
        meta=doc.get("meta", {}),
    )


def dumps(model: PerfModel) -> str:
    """Canonical serialization: sorted keys, tight separators, one newline."""
    return json.dumps(to_json_doc(model), sort_keys=True, separators=(",", ":")) + "\n"


def save(model: PerfModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model))


def loads(text: str) -> PerfModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    return from_json_doc(doc)


def load(path) -> PerfModel:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())
