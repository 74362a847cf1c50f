"""Kernel signatures: argument taxonomy, variant keys, operand extents.

A signature classifies every argument of a kernel as a flag (small enum
steering the code path), a size (problem dimension), a scalar (real
coefficient), an operand (matrix/vector data), or a leading dimension.
Signatures are registered from a JSON manifest, not from code; the bundled
manifest ships the eight kernels the trace generators emit.

A *variant* is everything that selects a distinct code path for the same
sizes: the non-excluded flag values plus the class of each scalar.  Scalars
classify into the special values -1, 0, 1 (exact comparison, no tolerance)
or the general class.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

from .errors import InvalidFlag, InvalidLeadingDimension, InvalidScalar, UnknownKernel

MAX_SIZE_DIMS = 3


class ScalarClass(enum.Enum):
    MINUS_ONE = "-1"
    ZERO = "0"
    ONE = "1"
    GENERAL = "*"

    def __str__(self) -> str:
        return self.value


def classify_scalar(value: float) -> ScalarClass:
    """Classify a scalar coefficient into its special-value class.

    Comparison is exact equality; anything non-finite is rejected.
    """
    value = float(value)
    if not math.isfinite(value):
        raise InvalidScalar(f"scalar must be finite, got {value!r}")
    if value == -1.0:
        return ScalarClass.MINUS_ONE
    if value == 0.0:
        return ScalarClass.ZERO
    if value == 1.0:
        return ScalarClass.ONE
    return ScalarClass.GENERAL


@dataclass(frozen=True)
class VariantKey:
    """Hashable identity of a kernel code path: flag values + scalar classes."""

    flags: tuple[tuple[str, str], ...]
    scalars: tuple[tuple[str, ScalarClass], ...]

    def canon(self) -> str:
        """Canonical string form, e.g. ``side=L,uplo=L,transA=N,alpha=1``."""
        parts = [f"{n}={v}" for n, v in self.flags]
        parts += [f"{n}={c}" for n, c in self.scalars]
        return ",".join(parts)

    def __str__(self) -> str:
        return self.canon()


@dataclass(frozen=True)
class FlagSpec:
    name: str
    values: tuple[str, ...]
    excluded: bool = False  # excluded flags (e.g. diag) never enter the key


@dataclass(frozen=True)
class OperandSpec:
    name: str
    rows: object  # dimension expression, see _eval_dim
    cols: object
    ld: str | None = None  # leading-dimension parameter name; None = contiguous


@dataclass(frozen=True)
class OperandExtent:
    name: str
    rows: int
    cols: int
    ld: int

    @property
    def elements(self) -> int:
        return self.rows * self.cols


def _eval_dim(spec: object, sizes: Mapping[str, int], flags: Mapping[str, str]) -> int:
    if isinstance(spec, int):
        return spec
    if isinstance(spec, str):
        if spec in sizes:
            return int(sizes[spec])
        return int(spec)  # integer literal
    if isinstance(spec, dict):
        if "case" in spec:
            flag = spec["case"]
            try:
                return _eval_dim(spec[flags[flag]], sizes, flags)
            except KeyError as exc:
                raise InvalidFlag(f"no case for flag {flag}={flags.get(flag)!r}") from exc
        if "min" in spec:
            return min(_eval_dim(s, sizes, flags) for s in spec["min"])
    raise ValueError(f"bad dimension expression: {spec!r}")


@dataclass(frozen=True)
class KernelSignature:
    id: str
    flags: tuple[FlagSpec, ...]
    sizes: tuple[str, ...]
    scalars: tuple[str, ...]
    operands: tuple[OperandSpec, ...]

    @property
    def dims(self) -> int:
        return len(self.sizes)

    def _check_flags(self, flags: Mapping[str, str]) -> None:
        declared = {f.name for f in self.flags}
        for name in flags:
            if name not in declared:
                raise InvalidFlag(f"{self.id}: unknown flag {name!r}")
        for f in self.flags:
            if f.name not in flags:
                raise InvalidFlag(f"{self.id}: missing flag {f.name!r}")
            if flags[f.name] not in f.values:
                raise InvalidFlag(
                    f"{self.id}: flag {f.name}={flags[f.name]!r} not in {f.values}"
                )

    def variant_key(self, flags: Mapping[str, str], scalars: Mapping[str, float]) -> VariantKey:
        """Build the variant key; excluded flags are dropped, scalars classified."""
        self._check_flags(flags)
        key_flags = tuple(
            (f.name, flags[f.name]) for f in self.flags if not f.excluded
        )
        missing = [s for s in self.scalars if s not in scalars]
        if missing:
            raise InvalidScalar(f"{self.id}: missing scalar(s) {missing}")
        key_scalars = tuple((s, classify_scalar(scalars[s])) for s in self.scalars)
        return VariantKey(key_flags, key_scalars)

    def parse_variant(self, text: str) -> VariantKey:
        """Parse the canonical ``name=value`` comma list back into a key."""
        fields: dict[str, str] = {}
        if text.strip():
            for part in text.split(","):
                name, _, value = part.partition("=")
                if not _:
                    raise InvalidFlag(f"{self.id}: malformed variant field {part!r}")
                fields[name.strip()] = value.strip()
        flags = {}
        for f in self.flags:
            if f.excluded:
                continue
            if f.name not in fields:
                raise InvalidFlag(f"{self.id}: variant missing flag {f.name!r}")
            flags[f.name] = fields.pop(f.name)
        # excluded flags may appear; validate and drop
        for f in self.flags:
            if f.excluded and f.name in fields:
                value = fields.pop(f.name)
                if value not in f.values:
                    raise InvalidFlag(f"{self.id}: flag {f.name}={value!r} not in {f.values}")
        scalars: list[tuple[str, ScalarClass]] = []
        for s in self.scalars:
            if s not in fields:
                raise InvalidScalar(f"{self.id}: variant missing scalar {s!r}")
            raw = fields.pop(s)
            try:
                cls = ScalarClass(raw)
            except ValueError:
                cls = classify_scalar(float(raw))
            scalars.append((s, cls))
        if fields:
            raise InvalidFlag(f"{self.id}: unknown variant field(s) {sorted(fields)}")
        key_flags = tuple((f.name, flags[f.name]) for f in self.flags if not f.excluded)
        for f in self.flags:
            if not f.excluded and flags[f.name] not in f.values:
                raise InvalidFlag(f"{self.id}: flag {f.name}={flags[f.name]!r} not in {f.values}")
        return VariantKey(key_flags, tuple(scalars))

    def check_sizes(self, sizes: Sequence[int]) -> tuple[int, ...]:
        if len(sizes) != len(self.sizes):
            raise ValueError(
                f"{self.id}: expected {len(self.sizes)} size(s) {self.sizes}, got {len(sizes)}"
            )
        sizes = tuple(int(s) for s in sizes)
        if any(s < 1 for s in sizes):
            raise ValueError(f"{self.id}: sizes must be positive, got {sizes}")
        return sizes

    def operand_extents(
        self,
        sizes: Sequence[int],
        flags: Mapping[str, str],
        lds: Mapping[str, int] | None = None,
    ) -> list[OperandExtent]:
        """Resolve each operand's (rows, cols, ld) for concrete sizes and flags.

        `lds` maps leading-dimension parameter names (e.g. ``ldA``) to values;
        a missing entry defaults to the operand's row count (contiguous
        storage).  An ld below the row count is invalid.
        """
        self._check_flags(flags)
        sizes = self.check_sizes(sizes)
        size_map = dict(zip(self.sizes, sizes))
        lds = dict(lds or {})
        out = []
        for op in self.operands:
            rows = _eval_dim(op.rows, size_map, flags)
            cols = _eval_dim(op.cols, size_map, flags)
            ld = int(lds.get(op.ld, rows)) if op.ld else rows
            if ld < rows:
                raise InvalidLeadingDimension(
                    f"{self.id}.{op.name}: ld {ld} < rows {rows}"
                )
            out.append(OperandExtent(op.name, rows, cols, ld))
        return out


def _parse_signature(entry: dict) -> KernelSignature:
    flags = tuple(
        FlagSpec(f["name"], tuple(f["values"]), bool(f.get("excluded", False)))
        for f in entry.get("flags", [])
    )
    sizes = tuple(entry.get("sizes", []))
    if not 1 <= len(sizes) <= MAX_SIZE_DIMS:
        raise ValueError(f"{entry.get('id')}: kernels take 1..{MAX_SIZE_DIMS} sizes")
    operands = tuple(
        OperandSpec(o["name"], o["rows"], o["cols"], o.get("ld"))
        for o in entry.get("operands", [])
    )
    return KernelSignature(
        id=entry["id"],
        flags=flags,
        sizes=sizes,
        scalars=tuple(entry.get("scalars", [])),
        operands=operands,
    )


class KernelRegistry:
    """Signatures loaded from manifest files, keyed by kernel id."""

    def __init__(self) -> None:
        self._sigs: dict[str, KernelSignature] = {}

    def load_manifest(self, source) -> list[str]:
        """Register kernels from a manifest (path, file object, or dict).

        Returns the ids registered.  Re-registering an existing id is an
        error; manifests extend, they do not patch.
        """
        if isinstance(source, dict):
            doc = source
        elif hasattr(source, "read"):
            doc = json.load(source)
        else:
            with open(source, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        if doc.get("schema") != 1:
            raise ValueError(f"unsupported kernel manifest schema {doc.get('schema')!r}")
        ids = []
        for entry in doc["kernels"]:
            sig = _parse_signature(entry)
            if sig.id in self._sigs:
                raise ValueError(f"kernel {sig.id!r} already registered")
            self._sigs[sig.id] = sig
            ids.append(sig.id)
        return ids

    def get(self, kernel_id: str) -> KernelSignature:
        try:
            return self._sigs[kernel_id]
        except KeyError:
            raise UnknownKernel(f"no kernel signature registered for {kernel_id!r}") from None

    def __contains__(self, kernel_id: str) -> bool:
        return kernel_id in self._sigs

    def ids(self) -> list[str]:
        return sorted(self._sigs)


registry = KernelRegistry()
with resources.files(__package__).joinpath("data/kernels.json").open("r") as _fh:
    registry.load_manifest(_fh)


def get_signature(kernel_id: str) -> KernelSignature:
    """Look up a signature in the default registry."""
    return registry.get(kernel_id)
