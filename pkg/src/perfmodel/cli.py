"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or model error.  Diagnostics go
to stderr; machine-readable output (CSV, JSON lines) goes to stdout or the
requested output file.

Commands
--------
model build --kernel K --config FILE --backend NAME --out FILE [--stamp]
model eval --model FILE --variant V --point M,N[,K] --condition ic|oc
model sweep-config --kernel K --config FILE --backend NAME [--stride N]
predict --alg A --n N [--m M] [--b B] --models DIR [--mode blended|ic|oc]
tune-b --alg A --n N [--m M] --b-range LO:HI:STEP --models DIR [--out FILE]
rank --specs FILE --models DIR [--tune [--b-range LO:HI:STEP]]
trace dump --alg A --n N [--m M] [--b B] [--out FILE]

The config file is JSON:

    {
      "machine": {"largest_cache_bytes": 262144, "flops_per_cycle": 8.0},
      "refine": {"target_error": 0.05, "oversample": 1, "error_metric": "max"},
      "reps": 15,
      "domains": [[[8, 1024], [8, 1024]]],
      "variants": {"dtrsm": ["side=L,uplo=L,transA=N,alpha=1"]},
      "backends": {
        "synth": {"type": "synthetic", "cost": {}, "noise": 0.002, "seed": 7},
        "blas": {"type": "shared-library", "library": "libblas.so",
                 "frequency_hz": 2.8e9}
      },
      "sweep": [{"label": "interp", "refine": {"oversample": 0}}]
    }

PERFMODEL_BLAS_LIB, when set, overrides the library path of shared-library
backends; no other setting is read from the environment.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

from . import store
from .algorithms import ALGORITHM_IDS, AlgorithmSpec, generate_trace
from .cachetrack import dump_trace
from .errors import PerfModelError
from .kernels import get_signature
from .modeler import RefinementConfig, accuracy_report
from .predictor import predict_trace, report_csv
from .synthetic import synthetic_backend_from_json
from .timing import Condition, MachineProfile, SharedLibraryBackend
from .tuner import default_block_range, rank_algorithms, ranking_csv, tune_blocksize, curve_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message: str):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# shared helpers

def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _machine_from_config(cfg: dict) -> MachineProfile | None:
    doc = cfg.get("machine")
    return MachineProfile.from_json(doc) if doc else None


def _refine_from_config(cfg: dict) -> RefinementConfig:
    return RefinementConfig.from_json(cfg.get("refine", {}))


def _domains_from_config(cfg: dict, kernel: str) -> list:
    doms = cfg.get("domains")
    if not doms:
        raise PerfModelError("config has no 'domains' entry")
    dims = get_signature(kernel).dims
    boxes = []
    for box in doms:
        box = tuple((int(lo), int(hi)) for lo, hi in box)
        if len(box) != dims:
            raise PerfModelError(
                f"domain box {box} has {len(box)} dims; kernel {kernel} has {dims}"
            )
        boxes.append(box)
    return boxes


def _variants_from_config(cfg: dict, kernel: str) -> list:
    sig = get_signature(kernel)
    spec = cfg.get("variants")
    if isinstance(spec, dict):
        spec = spec.get(kernel)
    if not spec:
        raise PerfModelError(f"config lists no variants for kernel {kernel!r}")
    return [sig.parse_variant(text) for text in spec]


def _single_threaded_blas() -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = "1"


def _make_backend(cfg: dict, name: str):
    backends = cfg.get("backends", {})
    if name not in backends:
        raise PerfModelError(
            f"config defines no backend {name!r} (have: {', '.join(sorted(backends)) or 'none'})"
        )
    doc = backends[name]
    kind = doc.get("type", "synthetic")
    if kind == "synthetic":
        return synthetic_backend_from_json(doc)
    if kind == "shared-library":
        machine = _machine_from_config(cfg)
        if machine is None:
            raise PerfModelError("shared-library backend needs a 'machine' config entry")
        _single_threaded_blas()
        library = os.environ.get("PERFMODEL_BLAS_LIB") or doc["library"]
        return SharedLibraryBackend(
            library,
            machine,
            frequency_hz=float(doc.get("frequency_hz", 1e9)),
            warmups=int(doc.get("warmups", 2)),
            eviction_factor=float(doc.get("eviction_factor", 2.0)),
            seed=int(doc.get("seed", 0)),
        )
    raise PerfModelError(f"unknown backend type {kind!r}")


def load_models_dir(path: str, kernels) -> dict:
    """Load `<kernel>.json` model files for each requested kernel id."""
    models = {}
    for kernel in kernels:
        file = Path(path) / f"{kernel}.json"
        if not file.exists():
            raise PerfModelError(f"no model file for kernel {kernel!r} under {path}")
        models[kernel] = store.load(file)
    return models


def _profile_for_prediction(models: dict, cache_bytes: int | None) -> MachineProfile:
    if cache_bytes is not None:
        return MachineProfile(largest_cache_bytes=int(cache_bytes))
    for model in models.values():
        if model.machine is not None:
            return model.machine
    raise PerfModelError(
        "no model file carries a machine profile; pass --cache-bytes explicitly"
    )


def _parse_point(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise _UsageError(f"bad --point {text!r}; expected comma-separated integers")


def _parse_brange(text: str) -> list:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise _UsageError(f"bad --b-range {text!r}; expected LO:HI[:STEP]")
    try:
        lo, hi = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 8
    except ValueError:
        raise _UsageError(f"bad --b-range {text!r}; expected integers")
    if lo <= 0 or hi < lo or step <= 0:
        raise _UsageError(f"bad --b-range {text!r}; need 0 < LO <= HI and STEP > 0")
    return list(range(lo, hi + 1, step))


def _algorithm_spec(args) -> AlgorithmSpec:
    return AlgorithmSpec(algorithm=args.alg, n=args.n, b=args.b, m=args.m).resolved()


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands

def cmd_model_build(args) -> int:
    cfg = _load_json(args.config)
    backend = _make_backend(cfg, args.backend)
    rcfg = _refine_from_config(cfg)
    variants = _variants_from_config(cfg, args.kernel)
    domains = _domains_from_config(cfg, args.kernel)
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat() if args.stamp else None
    model = store.build_model(
        backend,
        args.kernel,
        variants,
        domains,
        rcfg,
        reps=int(cfg.get("reps", 15)),
        machine=_machine_from_config(cfg),
        backend_id=args.backend,
        stamp=stamp,
    )
    store.save(model, args.out)
    meta = model.meta
    print(
        f"built {args.kernel}: boxes={meta['boxes_visited']} "
        f"grid_points={meta['grid_points']} measurements={meta['total_measurements']}"
    )
    for cond, per_variant in sorted(model.conditions.items()):
        for canon, vm in sorted(per_variant.items()):
            worst = max((p.fit_error for p in vm.patches), default=0.0)
            print(f"{cond} {canon}: patches={len(vm.patches)} worst_fit_error={worst!r}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_model_eval(args) -> int:
    model = store.load(args.model)
    sig = get_signature(model.kernel)
    variant = sig.parse_variant(args.variant)
    point = _parse_point(args.point)
    cycles = store.estimate(model, variant, Condition(args.condition), point)
    print(repr(cycles))
    return EXIT_OK


def cmd_model_sweep(args) -> int:
    cfg = _load_json(args.config)
    sweep = cfg.get("sweep")
    if not sweep:
        raise PerfModelError("config has no 'sweep' entry to iterate over")
    backend = _make_backend(cfg, args.backend)
    if not hasattr(backend, "true_cost"):
        raise PerfModelError("sweep-config needs a synthetic backend with a known true cost")
    variants = _variants_from_config(cfg, args.kernel)
    domains = _domains_from_config(cfg, args.kernel)
    base = cfg.get("refine", {})
    print("label,boxes,grid_points,measurements,avg_rel_error,max_rel_error")
    for entry in sweep:
        rcfg = RefinementConfig.from_json({**base, **entry.get("refine", {})})
        if hasattr(backend, "reset"):
            backend.reset()
        model = store.build_model(
            backend,
            args.kernel,
            variants,
            domains,
            rcfg,
            reps=int(cfg.get("reps", 15)),
            machine=_machine_from_config(cfg),
        )
        worst = {"avg": 0.0, "max": 0.0}
        for cond in (Condition.IN_CACHE, Condition.OUT_OF_CACHE):
            for variant in variants:
                report = accuracy_report(
                    lambda pt, v=variant, c=cond: store.estimate(model, v, c, pt),
                    lambda pt, v=variant, c=cond: backend.true_cost(
                        args.kernel, v, c, pt
                    ),
                    domains,
                    stride=args.stride,
                )
                worst["avg"] = max(worst["avg"], report["avg_rel_error"])
                worst["max"] = max(worst["max"], report["max_rel_error"])
        meta = model.meta
        print(
            f"{entry.get('label', '?')},{meta['boxes_visited']},{meta['grid_points']},"
            f"{meta['total_measurements']},{worst['avg']!r},{worst['max']!r}"
        )
    return EXIT_OK


def cmd_predict(args) -> int:
    spec = _algorithm_spec(args)
    trace = generate_trace(spec)
    kernels = sorted({call.kernel for call in trace.calls})
    models = load_models_dir(args.models, kernels)
    profile = _profile_for_prediction(models, args.cache_bytes)
    prediction = predict_trace(trace, models, profile, mode=args.mode)
    _write_or_print(report_csv(prediction), args.out)
    return EXIT_OK


def cmd_tune_b(args) -> int:
    blocks = _parse_brange(args.b_range)
    probe = AlgorithmSpec(algorithm=args.alg, n=args.n, b=blocks[0], m=args.m)
    trace = generate_trace(probe)
    kernels = sorted({call.kernel for call in trace.calls})
    models = load_models_dir(args.models, kernels)
    profile = _profile_for_prediction(models, args.cache_bytes)
    result = tune_blocksize(
        args.alg, args.n, models, profile, m=args.m, blocks=blocks, mode=args.mode
    )
    print(f"best_b={result.best_b} cycles={result.best_cycles!r}")
    _write_or_print(curve_csv(result), args.out)
    return EXIT_OK


def cmd_rank(args) -> int:
    doc = _load_json(args.specs)
    if not isinstance(doc, list) or not doc:
        raise PerfModelError(f"{args.specs}: expected a non-empty JSON list of specs")
    specs = [
        AlgorithmSpec(
            algorithm=entry["algorithm"],
            n=int(entry["n"]),
            b=int(entry["b"]) if entry.get("b") is not None else None,
            m=int(entry["m"]) if entry.get("m") is not None else None,
        ).resolved()
        for entry in doc
    ]
    blocks = _parse_brange(args.b_range) if args.b_range else None
    kernels = set()
    for spec in specs:
        kernels.update(call.kernel for call in generate_trace(spec).calls)
        if args.tune:
            # candidate blocks can call kernels the requested block avoids;
            # the smallest candidate produces the superset
            probe = (blocks or default_block_range(spec.n))[0]
            probe_trace = generate_trace(AlgorithmSpec(spec.algorithm, spec.n, probe, spec.m))
            kernels.update(call.kernel for call in probe_trace.calls)
    models = load_models_dir(args.models, sorted(kernels))
    profile = _profile_for_prediction(models, args.cache_bytes)
    if args.tune:
        tuned = []
        for spec in specs:
            result = tune_blocksize(
                spec.algorithm,
                spec.n,
                models,
                profile,
                m=spec.m,
                blocks=blocks or default_block_range(spec.n),
                mode=args.mode,
            )
            tuned.append(AlgorithmSpec(spec.algorithm, spec.n, result.best_b, spec.m))
        specs = tuned
    entries = rank_algorithms(specs, models, profile, mode=args.mode)
    _write_or_print(ranking_csv(entries), args.out)
    return EXIT_OK


def cmd_trace_dump(args) -> int:
    spec = _algorithm_spec(args)
    trace = generate_trace(spec)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            dump_trace(trace, fh)
    else:
        dump_trace(trace, sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring

def _add_alg_args(p, need_b: bool = True) -> None:
    p.add_argument("--alg", required=True, choices=sorted(ALGORITHM_IDS) + ["chol_alg2", "chol_dpotrf"])
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--m", type=int, default=None, help="rows (QR only; defaults to n)")
    if need_b:
        p.add_argument("--b", type=int, default=None, help="block size (default per algorithm)")


def _add_predict_args(p) -> None:
    p.add_argument("--models", required=True, help="directory of <kernel>.json model files")
    p.add_argument("--mode", choices=["blended", "ic", "oc"], default="blended")
    p.add_argument("--cache-bytes", type=int, default=None, help="override the model machine profile")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")


def build_parser() -> _Parser:
    parser = _Parser(prog="perfmodel", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    model = sub.add_parser("model", help="build, evaluate, and study models")
    msub = model.add_subparsers(dest="model_command", required=True)

    p = msub.add_parser("build", help="adaptively sample a kernel and write its model")
    p.add_argument("--kernel", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stamp", action="store_true", help="record the build time in the file")
    p.set_defaults(func=cmd_model_build)

    p = msub.add_parser("eval", help="evaluate a stored model at one point")
    p.add_argument("--model", required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--point", required=True, help="comma-separated sizes, e.g. 96,96")
    p.add_argument("--condition", required=True, choices=["ic", "oc"])
    p.set_defaults(func=cmd_model_eval)

    p = msub.add_parser("sweep-config", help="accuracy-vs-samples table over config variations")
    p.add_argument("--kernel", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--stride", type=int, default=8)
    p.set_defaults(func=cmd_model_sweep)

    p = sub.add_parser("predict", help="predict an algorithm trace's runtime")
    _add_alg_args(p)
    _add_predict_args(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("tune-b", help="sweep block sizes and pick the fastest")
    _add_alg_args(p, need_b=False)
    p.add_argument("--b-range", required=True, help="LO:HI[:STEP], inclusive")
    _add_predict_args(p)
    p.set_defaults(func=cmd_tune_b)

    p = sub.add_parser("rank", help="order algorithm candidates by predicted runtime")
    p.add_argument("--specs", required=True, help="JSON list of {algorithm, n, b?, m?}")
    p.add_argument("--tune", action="store_true", help="tune each candidate's b first")
    p.add_argument("--b-range", default=None, help="LO:HI[:STEP] for --tune")
    _add_predict_args(p)
    p.set_defaults(func=cmd_rank)

    trace = sub.add_parser("trace", help="work with kernel-call traces")
    tsub = trace.add_subparsers(dest="trace_command", required=True)
    p = tsub.add_parser("dump", help="emit an algorithm's trace as JSON lines")
    _add_alg_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_trace_dump)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PerfModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc!r}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
