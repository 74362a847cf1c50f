"""Compare the compiled access-distance scan against the pure-numpy fallback.

Builds a blocked QR trace, samples (call, operand) pairs, and times
``scan_access_distance`` on the same packed arrays with both implementations.
Results must agree bit-for-bit; the script fails loudly if they diverge.

    python3 benchmarks/bench_scan.py [--n 768] [--block 32] [--cache-kib 2048]
                                     [--scans 400] [--seed 0]
"""

import argparse
import importlib
import time

import numpy as np

from perfmodel.algorithms import qr_trace


def load_impls():
    impls = {}
    try:
        impls["compiled"] = importlib.import_module("perfmodel._scan")
    except ImportError:
        pass
    impls["pure"] = importlib.import_module("perfmodel._scan_py")
    return impls


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=768, help="QR matrix order")
    ap.add_argument("--block", type=int, default=32, help="QR panel width")
    ap.add_argument("--cache-kib", type=int, default=2048)
    ap.add_argument("--scans", type=int, default=400, help="sampled (call, operand) pairs")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    trace = qr_trace(args.n, args.n, args.block)
    starts, ends, call_ptr = trace.packed()
    cache = args.cache_kib * 1024

    pairs = [
        (i, op.region.starts, op.region.ends)
        for i, call in enumerate(trace.calls)
        for op in call.operands
    ]
    rng = np.random.default_rng(args.seed)
    if args.scans < len(pairs):
        pairs = [pairs[k] for k in rng.choice(len(pairs), size=args.scans, replace=False)]

    print(
        f"trace: qr n={args.n} b={args.block}: {len(trace)} calls, "
        f"{trace.total_footprint} B footprint, cache {args.cache_kib} KiB, "
        f"{len(pairs)} scans"
    )

    impls = load_impls()
    results = {}
    seconds = {}
    for name, mod in impls.items():
        t0 = time.perf_counter()
        out = [
            mod.scan_access_distance(
                starts, ends, call_ptr, os_, oe_, i, cache, trace.total_footprint
            )
            for i, os_, oe_ in pairs
        ]
        seconds[name] = time.perf_counter() - t0
        results[name] = out
        print(
            f"{name:>8}: {seconds[name]:8.4f} s total, "
            f"{seconds[name] / len(pairs) * 1e6:9.2f} us/scan"
        )

    if len(results) == 2:
        if results["compiled"] != results["pure"]:
            print("MISMATCH: compiled and pure scans disagree")
            return 1
        print(
            "results identical across implementations; "
            f"compiled is {seconds['pure'] / seconds['compiled']:.1f}x faster"
        )
    else:
        print("compiled extension not built; timed the pure fallback only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
