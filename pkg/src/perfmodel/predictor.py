"""Trace runtime prediction blending in-cache and out-of-cache estimates.

For every call, each operand's access distance d is compared with the cache
size c through the margin r = (c - d) / c, squashed by an asymmetric tanh,
and averaged weighted by operand size into an association score alpha in
(-1, 1).  The call's time is the alpha-weighted mix of the in-cache and
out-of-cache model estimates; the trace prediction is the sum over calls.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

from .cachetrack import Trace, access_distance
from .errors import NoOperands, PerfModelError, UnknownKernel
from .store import PerfModel, estimate
from .timing import Condition, MachineProfile

PredictionMode = Literal["blended", "ic", "oc"]


def smooth(r: float) -> float:
    """Squash a cache margin into (-1, 1): hits saturate faster than misses."""
    return math.tanh(4.0 * r) if r >= 0 else math.tanh(2.0 * r)


@dataclass(frozen=True)
class OperandAssociation:
    name: str
    size_bytes: int
    distance: int
    margin: float
    score: float


def cache_association(
    distances: Sequence[int],
    sizes_bytes: Sequence[int],
    cache_bytes: int,
    *,
    names: Sequence[str] | None = None,
) -> tuple[float, list[OperandAssociation]]:
    """Size-weighted mean of per-operand smoothed cache margins."""
    if len(distances) != len(sizes_bytes):
        raise ValueError("distances and sizes_bytes must have equal length")
    if not distances:
        raise NoOperands("cannot associate a call with no operands")
    if cache_bytes <= 0:
        raise ValueError("cache_bytes must be positive")
    if names is None:
        names = [str(i) for i in range(len(distances))]
    details: list[OperandAssociation] = []
    num = 0.0
    den = 0.0
    for name, d, s in zip(names, distances, sizes_bytes):
        if s <= 0:
            raise ValueError(f"operand {name!r} has non-positive size {s}")
        r = (cache_bytes - d) / cache_bytes
        f = smooth(r)
        details.append(OperandAssociation(name, int(s), int(d), r, f))
        num += f * s
        den += s
    return num / den, details


def blend(alpha: float, t_ic: float, t_oc: float) -> float:
    return (1.0 + alpha) / 2.0 * t_ic + (1.0 - alpha) / 2.0 * t_oc


@dataclass(frozen=True)
class CallPrediction:
    index: int
    kernel: str
    variant: str
    sizes: tuple[int, ...]
    operands: tuple[OperandAssociation, ...]
    alpha: float
    t_ic: float
    t_oc: float
    t: float


@dataclass(frozen=True)
class TracePrediction:
    mode: str
    cache_bytes: int
    calls: tuple[CallPrediction, ...]
    total: float


def predict_trace(
    trace: Trace,
    models: Mapping[str, PerfModel],
    profile: MachineProfile,
    *,
    mode: PredictionMode = "blended",
) -> TracePrediction:
    """Predict cycles for every call of `trace` and sum them.

    mode "ic"/"oc" force alpha = +1/-1 respectively and skip the access
    distance scans entirely; "blended" runs one backward scan per operand.
    """
    if mode not in ("blended", "ic", "oc"):
        raise ValueError(f"unknown prediction mode {mode!r}")
    cache = profile.largest_cache_bytes
    memo: dict[tuple, float] = {}

    def model_time(kernel: str, variant, cond: Condition, sizes: tuple[int, ...]) -> float:
        key = (kernel, variant.canon(), cond.value, sizes)
        if key not in memo:
            model = models.get(kernel)
            if model is None:
                raise UnknownKernel(f"no model for kernel {kernel!r}")
            memo[key] = estimate(model, variant, cond, sizes)
        return memo[key]

    preds: list[CallPrediction] = []
    total = 0.0
    for i, call in enumerate(trace.calls):
        try:
            t_ic = model_time(call.kernel, call.variant, Condition.IN_CACHE, call.sizes)
            t_oc = model_time(call.kernel, call.variant, Condition.OUT_OF_CACHE, call.sizes)
            if mode == "blended":
                dists = []
                sizes_b = []
                names = []
                for op in call.operands:
                    res = access_distance(trace, i, op.name, cache)
                    dists.append(res.distance)
                    sizes_b.append(op.region.measure)
                    names.append(op.name)
                alpha, details = cache_association(dists, sizes_b, cache, names=names)
            else:
                alpha = 1.0 if mode == "ic" else -1.0
                details = []
        except PerfModelError as exc:
            raise type(exc)(f"call {i} ({call.kernel}): {exc}") from exc
        t = blend(alpha, t_ic, t_oc)
        preds.append(
            CallPrediction(
                index=i,
                kernel=call.kernel,
                variant=call.variant.canon(),
                sizes=call.sizes,
                operands=tuple(details),
                alpha=alpha,
                t_ic=t_ic,
                t_oc=t_oc,
                t=t,
            )
        )
        total += t
    return TracePrediction(mode=mode, cache_bytes=cache, calls=tuple(preds), total=total)


def report_csv(prediction: TracePrediction) -> str:
    """Per-call breakdown plus a trailing totals row."""
    buf = io.StringIO()
    buf.write("index,kernel,variant,sizes,alpha,t_ic,t_oc,t\n")
    for cp in prediction.calls:
        sizes = "x".join(str(s) for s in cp.sizes)
        buf.write(
            f"{cp.index},{cp.kernel},\"{cp.variant}\",{sizes},"
            f"{cp.alpha!r},{cp.t_ic!r},{cp.t_oc!r},{cp.t!r}\n"
        )
    buf.write(f"total,,,,,,,{prediction.total!r}\n")
    return buf.getvalue()
