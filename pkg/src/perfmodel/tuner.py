"""Block-size tuning and algorithm ranking on top of trace prediction.

Candidate block sizes (or whole algorithm formulations) are compared by
generating the call trace each one would execute and predicting its total
runtime; no candidate is ever run.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Mapping, Sequence

from .algorithms import AlgorithmSpec, efficiency, generate_trace, trace_flops
from .errors import InvalidSpec
from .predictor import PredictionMode, predict_trace
from .store import PerfModel
from .timing import MachineProfile


@dataclass(frozen=True)
class TuneResult:
    algorithm: str
    n: int
    m: int | None
    mode: str
    best_b: int
    best_cycles: float
    curve: tuple[tuple[int, float], ...]


def default_block_range(n: int, *, step: int = 8, b_max: int | None = None) -> list[int]:
    hi = min(n, 256 if b_max is None else b_max)
    return [b for b in range(step, hi + 1, step)]


def tune_blocksize(
    algorithm: str,
    n: int,
    models: Mapping[str, PerfModel],
    profile: MachineProfile,
    *,
    m: int | None = None,
    blocks: Sequence[int] | None = None,
    step: int = 8,
    b_max: int | None = None,
    mode: PredictionMode = "blended",
) -> TuneResult:
    """Predict every candidate block size and keep the fastest (ties: smaller b)."""
    if blocks is None:
        blocks = default_block_range(n, step=step, b_max=b_max)
    blocks = [int(b) for b in blocks]
    if not blocks:
        raise InvalidSpec("no candidate block sizes to tune over")
    curve: list[tuple[int, float]] = []
    best_b: int | None = None
    best_cycles = float("inf")
    for b in blocks:
        spec = AlgorithmSpec(algorithm=algorithm, n=n, b=b, m=m)
        trace = generate_trace(spec)
        cycles = predict_trace(trace, models, profile, mode=mode).total
        curve.append((b, cycles))
        if cycles < best_cycles:
            best_b = b
            best_cycles = cycles
    assert best_b is not None
    return TuneResult(
        algorithm=algorithm,
        n=n,
        m=m,
        mode=mode,
        best_b=best_b,
        best_cycles=best_cycles,
        curve=tuple(curve),
    )


@dataclass(frozen=True)
class RankEntry:
    rank: int
    spec: AlgorithmSpec
    cycles: float
    efficiency: float


def rank_algorithms(
    specs: Sequence[AlgorithmSpec],
    models: Mapping[str, PerfModel],
    profile: MachineProfile,
    *,
    mode: PredictionMode = "blended",
) -> list[RankEntry]:
    """Order algorithm candidates by predicted cycles, fastest first.

    Sorting is stable: candidates with identical predictions keep their
    input order.  Efficiency is the candidate's useful-flop rate relative
    to the machine peak.
    """
    scored = []
    for spec in specs:
        trace = generate_trace(spec)
        cycles = predict_trace(trace, models, profile, mode=mode).total
        scored.append((spec, cycles, efficiency(cycles, trace_flops(trace), profile)))
    scored.sort(key=lambda item: item[1])
    return [
        RankEntry(rank=i + 1, spec=spec, cycles=cycles, efficiency=eff)
        for i, (spec, cycles, eff) in enumerate(scored)
    ]


def curve_csv(result: TuneResult) -> str:
    buf = io.StringIO()
    buf.write("b,cycles\n")
    for b, cycles in result.curve:
        buf.write(f"{b},{cycles!r}\n")
    return buf.getvalue()


def ranking_csv(entries: Sequence[RankEntry]) -> str:
    buf = io.StringIO()
    buf.write("rank,algorithm,n,m,b,cycles,efficiency\n")
    for e in entries:
        resolved = e.spec.resolved()
        m = "" if resolved.m is None else resolved.m
        buf.write(
            f"{e.rank},{resolved.algorithm},{resolved.n},{m},{resolved.b},"
            f"{e.cycles!r},{e.efficiency!r}\n"
        )
    return buf.getvalue()
