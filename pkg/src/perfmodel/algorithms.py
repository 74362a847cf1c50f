"""Blocked-algorithm traces: QR and four Cholesky formulations.

Each generator emits the exact sequence of kernel calls the blocked algorithm
performs, with operand byte regions laid out as the algorithm would see them:
column-major matrices allocated back to back (A, then tau, then the workspace
W for QR; A alone for Cholesky), sub-blocks aliasing into their parents.

Flop counts are exact integers.  All Cholesky formulations total
``n(n+1)(2n+1)/6 = n^3/3 + n^2/2 + n/6`` regardless of block size; blocked QR
exceeds the unblocked count because the compact update does extra work on the
T matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cachetrack import KernelCall, OperandRegion, Trace
from .errors import InvalidSpec, UnknownKernel
from .kernels import get_signature
from .regions import ELEMENT_BYTES, RegionSet, submatrix_region, vector_region
from .timing import MachineProfile

QR_DEFAULT_BLOCK = 32
CHOL_DEFAULT_BLOCK = 256
CHOL_RECURSIVE_DEFAULT_BLOCK = 24

ALGORITHM_IDS = (
    "qr_blocked",
    "chol_alg1",
    "chol_alg2_dpotrf",
    "chol_alg3",
    "chol_recursive",
)

# the LAPACK-named routine and alg2 share one generator
ALGORITHM_ALIASES = {
    "chol_alg2": "chol_alg2_dpotrf",
    "chol_dpotrf": "chol_alg2_dpotrf",
}

_DEFAULT_BLOCKS = {
    "qr_blocked": QR_DEFAULT_BLOCK,
    "chol_alg1": CHOL_DEFAULT_BLOCK,
    "chol_alg2_dpotrf": CHOL_DEFAULT_BLOCK,
    "chol_alg3": CHOL_DEFAULT_BLOCK,
    "chol_recursive": CHOL_RECURSIVE_DEFAULT_BLOCK,
}


def resolve_algorithm(algorithm: str) -> str:
    canon = ALGORITHM_ALIASES.get(algorithm, algorithm)
    if canon not in ALGORITHM_IDS:
        raise InvalidSpec(f"unknown algorithm {algorithm!r}; known: {ALGORITHM_IDS}")
    return canon


def default_block(algorithm: str) -> int:
    return _DEFAULT_BLOCKS[resolve_algorithm(algorithm)]


@dataclass(frozen=True)
class AlgorithmSpec:
    """What to predict: an algorithm, its problem sizes, and a block size."""

    algorithm: str
    n: int
    b: int | None = None
    m: int | None = None  # QR only; defaults to n

    def resolved(self) -> "AlgorithmSpec":
        algorithm = resolve_algorithm(self.algorithm)
        b = self.b if self.b is not None else _DEFAULT_BLOCKS[algorithm]
        m = self.m if self.m is not None else self.n
        if self.n < 1 or b < 1:
            raise InvalidSpec(f"sizes must be positive: n={self.n}, b={b}")
        if algorithm == "qr_blocked" and m < self.n:
            raise InvalidSpec(f"QR requires m >= n, got m={m}, n={self.n}")
        return AlgorithmSpec(algorithm, self.n, b, m)


def _call(kernel: str, flags: dict, scalars: dict, sizes: tuple, operands: list) -> KernelCall:
    sig = get_signature(kernel)
    return KernelCall(
        kernel=kernel,
        variant=sig.variant_key(flags, scalars),
        sizes=sig.check_sizes(sizes),
        operands=tuple(OperandRegion(name, region) for name, region in operands),
    )


def qr_trace(m: int, n: int, b: int) -> Trace:
    """Blocked Householder QR (compact WY update through a workspace W).

    Layout: A (m x n, ld m) at offset 0, then tau (n), then W (n x b, ld n).
    Each iteration factors the panel with dgeqr2; when a trailing matrix
    remains it builds the T factor (dlarft into W1), transposes the panel's
    row block into W2 with b column copies, and applies the block reflector
    with three dtrmm and two dgemm calls.
    """
    if m < n or n < 1 or b < 1:
        raise InvalidSpec(f"QR requires m >= n >= 1 and b >= 1, got {m}, {n}, {b}")
    eb = ELEMENT_BYTES
    ld_a = m
    base_tau = m * n * eb
    base_w = base_tau + n * eb
    ld_w = n
    footprint = base_w + n * b * eb

    def ablock(r0: int, c0: int, h: int, w: int) -> RegionSet:
        return submatrix_region((c0 * ld_a + r0) * eb, h, w, ld_a)

    def wblock(r0: int, c0: int, h: int, w: int) -> RegionSet:
        return submatrix_region(base_w + (c0 * ld_w + r0) * eb, h, w, ld_w)

    calls: list[KernelCall] = []
    j = 0
    while j < n:
        bc = min(b, n - j)
        h = n - j - bc  # trailing columns
        mm = m - j
        mt = m - j - bc  # trailing rows
        panel = ablock(j, j, mm, bc)
        tau1 = vector_region(base_tau + j * eb, bc)
        calls.append(_call("dgeqr2", {}, {}, (mm, bc), [("A", panel), ("tau", tau1)]))
        if h > 0:
            # bc < b only at the last panel, which has no trailing matrix
            w1 = wblock(0, 0, bc, bc)
            w2 = wblock(b, 0, h, bc)
            a11 = ablock(j, j, bc, bc)
            a12 = ablock(j, j + bc, bc, h)
            a21 = ablock(j + bc, j, mt, bc)
            a22 = ablock(j + bc, j + bc, mt, h)
            calls.append(
                _call("dlarft", {"direct": "F", "storev": "C"}, {}, (mm, bc),
                      [("V", panel), ("tau", tau1), ("T", w1)])
            )
            for t in range(bc):
                row = ablock(j + t, j + bc, 1, h)
                col = wblock(b, t, h, 1)
                calls.append(_call("dcopy", {}, {}, (h,), [("x", row), ("y", col)]))
            calls.append(
                _call("dtrmm", {"side": "R", "uplo": "L", "transA": "N", "diag": "U"},
                      {"alpha": 1.0}, (h, bc), [("A", a11), ("B", w2)])
            )
            calls.append(
                _call("dgemm", {"transA": "T", "transB": "N"},
                      {"alpha": 1.0, "beta": 1.0}, (h, bc, mt),
                      [("A", a22), ("B", a21), ("C", w2)])
            )
            calls.append(
                _call("dtrmm", {"side": "R", "uplo": "U", "transA": "N", "diag": "N"},
                      {"alpha": 1.0}, (h, bc), [("A", w1), ("B", w2)])
            )
            calls.append(
                _call("dgemm", {"transA": "N", "transB": "T"},
                      {"alpha": -1.0, "beta": 1.0}, (mt, h, bc),
                      [("A", a21), ("B", w2), ("C", a22)])
            )
            calls.append(
                _call("dtrmm", {"side": "R", "uplo": "L", "transA": "T", "diag": "U"},
                      {"alpha": 1.0}, (h, bc), [("A", a11), ("B", w2)])
            )
        j += bc
    return Trace(calls, footprint)


def _chol_blocks(n: int):
    eb = ELEMENT_BYTES

    def block(r0: int, c0: int, h: int, w: int) -> RegionSet:
        return submatrix_region((c0 * n + r0) * eb, h, w, n)

    return block


def chol_trace(variant: str, n: int, b: int) -> Trace:
    """Lower-triangular Cholesky in one of four blocked formulations."""
    variant = resolve_algorithm(variant)
    if variant == "qr_blocked":
        raise InvalidSpec("chol_trace does not generate QR traces")
    if n < 1 or b < 1:
        raise InvalidSpec(f"Cholesky requires n >= 1 and b >= 1, got {n}, {b}")
    eb = ELEMENT_BYTES
    block = _chol_blocks(n)
    footprint = n * n * eb
    calls: list[KernelCall] = []

    def potf2(off: int, sz: int) -> None:
        calls.append(_call("dpotf2", {"uplo": "L"}, {}, (sz,), [("A", block(off, off, sz, sz))]))

    def trsm(a_off: int, a_sz: int, b_r0: int, rows: int) -> None:
        # B := B * tril(A)^-T, the panel solve shared by all formulations
        calls.append(
            _call("dtrsm", {"side": "R", "uplo": "L", "transA": "T", "diag": "N"},
                  {"alpha": 1.0}, (rows, a_sz),
                  [("A", block(a_off, a_off, a_sz, a_sz)), ("B", block(b_r0, a_off, rows, a_sz))])
        )

    def syrk(rows: int, k: int, a_r0: int, a_c0: int, c_off: int) -> None:
        calls.append(
            _call("dsyrk", {"uplo": "L", "trans": "N"}, {"alpha": -1.0, "beta": 1.0},
                  (rows, k),
                  [("A", block(a_r0, a_c0, rows, k)), ("C", block(c_off, c_off, rows, rows))])
        )

    if variant == "chol_alg1":
        j = 0
        while j < n:
            bc = min(b, n - j)
            if j > 0:
                trsm(0, j, j, bc)  # A10 := A10 A00^-T against the whole factored leading block
                syrk(bc, j, j, 0, j)  # A11 -= A10 A10^T
            potf2(j, bc)
            j += bc
    elif variant == "chol_alg2_dpotrf":
        j = 0
        while j < n:
            bc = min(b, n - j)
            r = n - j - bc
            if j > 0:
                syrk(bc, j, j, 0, j)
            potf2(j, bc)
            if r > 0:
                if j > 0:
                    calls.append(
                        _call("dgemm", {"transA": "N", "transB": "T"},
                              {"alpha": -1.0, "beta": 1.0}, (r, bc, j),
                              [("A", block(j + bc, 0, r, j)), ("B", block(j, 0, bc, j)),
                               ("C", block(j + bc, j, r, bc))])
                    )
                trsm(j, bc, j + bc, r)
            j += bc
    elif variant == "chol_alg3":
        j = 0
        while j < n:
            bc = min(b, n - j)
            r = n - j - bc
            potf2(j, bc)
            if r > 0:
                trsm(j, bc, j + bc, r)
                syrk(r, bc, j + bc, j, j + bc)
            j += bc
    else:  # chol_recursive: halve until the block fits, no rounding to b
        def recurse(off: int, sz: int) -> None:
            if sz <= b:
                potf2(off, sz)
                return
            h = (sz + 1) // 2
            rest = sz - h
            recurse(off, h)
            trsm(off, h, off + h, rest)
            syrk(rest, h, off + h, off, off + h)
            recurse(off + h, rest)

        recurse(0, n)
    return Trace(calls, footprint)


def generate_trace(spec: AlgorithmSpec) -> Trace:
    """Trace for an algorithm spec (defaults resolved)."""
    spec = spec.resolved()
    if spec.algorithm == "qr_blocked":
        return qr_trace(spec.m, spec.n, spec.b)
    return chol_trace(spec.algorithm, spec.n, spec.b)


def dgeqr2_flops(m: int, n: int) -> int:
    """Householder QR of an m x n panel: reflector build + in-panel updates."""
    total = 0
    for i in range(min(m, n)):
        total += 3 * (m - i) + 4 * (m - i) * (n - i - 1)
    return total


def dlarft_flops(n: int, k: int) -> int:
    """T-factor accumulation: column j costs 2(n-j)j MAC work plus a j^2 solve."""
    return sum(2 * (n - j) * j + j * j for j in range(k))


def kernel_flops(kernel: str, sizes: tuple[int, ...], *, side: str | None = None) -> int:
    """Exact flop count for a kernel at a size point.

    `side` is required for dtrsm/dtrmm (their cost depends on which operand
    is triangular).  dcopy moves bytes, zero flops.
    """
    if kernel == "dgemm":
        m, n, k = sizes
        return 2 * m * n * k
    if kernel in ("dtrsm", "dtrmm"):
        m, n = sizes
        if side not in ("L", "R"):
            raise ValueError(f"{kernel} flop count needs side, got {side!r}")
        return n * m * m if side == "L" else m * n * n
    if kernel == "dsyrk":
        n, k = sizes
        return n * (n + 1) * k
    if kernel == "dpotf2":
        (n,) = sizes
        return n * (n + 1) * (2 * n + 1) // 6
    if kernel == "dgeqr2":
        m, n = sizes
        return dgeqr2_flops(m, n)
    if kernel == "dlarft":
        n, k = sizes
        return dlarft_flops(n, k)
    if kernel == "dcopy":
        return 0
    raise UnknownKernel(f"no flop rule for kernel {kernel!r}")


def call_flops(call: KernelCall) -> int:
    """Exact flop count of one call."""
    side = dict(call.variant.flags).get("side")
    return kernel_flops(call.kernel, call.sizes, side=side)


def trace_flops(trace: Trace) -> int:
    """Total exact flops of a trace."""
    return sum(call_flops(c) for c in trace.calls)


def efficiency(cycles: float, flops: int, profile: MachineProfile) -> float:
    """Attained fraction of machine peak for a (cycles, flops) pair."""
    if cycles <= 0:
        raise ValueError("cycles must be positive")
    return flops / (cycles * profile.flops_per_cycle)
