"""Timing backends and the measurement orchestration.

Measurements are taken per (kernel, variant, cache condition, size point) and
reduced to the median over repetitions.  Two cache conditions exist:

* ``IN_CACHE``: operands are warmed by untimed executions first (at least
  two), so repeated runs hit the cache;
* ``OUT_OF_CACHE``: an eviction buffer at least twice the largest cache is
  streamed between repetitions, so every run starts cold.

The synthetic backend fabricates cycle counts from a closed-form cost
function plus seeded multiplicative noise; it makes the whole pipeline
deterministic and hardware-independent.  The shared-library backend drives a
real BLAS/LAPACK via ctypes and is disabled unless explicitly configured.
"""

from __future__ import annotations

import enum
import statistics
import warnings
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import BackendError, ResourceError
from .kernels import KernelSignature, VariantKey, get_signature


class Condition(enum.Enum):
    IN_CACHE = "ic"
    OUT_OF_CACHE = "oc"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class MachineProfile:
    """The few machine constants predictions need."""

    largest_cache_bytes: int
    flops_per_cycle: float = 8.0
    element_bytes: int = 8

    def to_json(self) -> dict:
        return {
            "largest_cache_bytes": self.largest_cache_bytes,
            "flops_per_cycle": self.flops_per_cycle,
            "element_bytes": self.element_bytes,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MachineProfile":
        return cls(
            largest_cache_bytes=int(doc["largest_cache_bytes"]),
            flops_per_cycle=float(doc.get("flops_per_cycle", 8.0)),
            element_bytes=int(doc.get("element_bytes", 8)),
        )


@dataclass(frozen=True)
class Sample:
    """One measured size point."""

    kernel: str
    variant: VariantKey
    condition: Condition
    point: tuple[int, ...]
    cycles: tuple[float, ...]
    median_cycles: float


class Backend(Protocol):
    """Measurement plugin contract.

    `collect` returns one cycle count per repetition for the kernel at the
    given variant, cache condition, and size point.  The backend itself is
    responsible for establishing the condition (warm-up passes or cache
    eviction between repetitions).
    """

    def collect(
        self,
        kernel: str,
        variant: VariantKey,
        condition: Condition,
        sizes: Sequence[int],
        reps: int,
    ) -> list[float]: ...


CostFn = Callable[[str, VariantKey, Condition, tuple[int, ...]], float]


class SyntheticBackend:
    """Fabricates cycles from ``cost_fn`` with multiplicative uniform noise.

    Each repetition returns ``cost * (1 + u)`` with ``u ~ U[-noise, +noise]``
    drawn from a seeded generator, so a fixed seed reproduces the identical
    cycle sequence run after run.
    """

    def __init__(self, cost_fn: CostFn, *, noise: float = 0.0, seed: int = 0):
        if not 0.0 <= noise < 1.0:
            raise ValueError("noise amplitude must be in [0, 1)")
        self.cost_fn = cost_fn
        self.noise = noise
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def reset(self) -> None:
        """Rewind the noise stream to the seed."""
        self._rng = np.random.default_rng(self.seed)

    def true_cost(
        self, kernel: str, variant: VariantKey, condition: Condition, sizes: Sequence[int]
    ) -> float:
        """The noiseless cost (the oracle a model is judged against)."""
        return float(self.cost_fn(kernel, variant, condition, tuple(int(s) for s in sizes)))

    def collect(self, kernel, variant, condition, sizes, reps):
        cost = self.true_cost(kernel, variant, condition, sizes)
        if cost < 0:
            raise BackendError(f"synthetic cost is negative at {tuple(sizes)}: {cost}")
        if self.noise == 0.0:
            return [cost] * reps
        u = self._rng.uniform(-self.noise, self.noise, size=reps)
        return [float(c) for c in cost * (1.0 + u)]


def measure(
    backend: Backend,
    kernel: str,
    variant: VariantKey,
    condition: Condition,
    sizes: Sequence[int],
    reps: int = 15,
    *,
    profile: MachineProfile | None = None,
) -> Sample:
    """Collect `reps` timings and reduce to the median.

    With a profile given, warns when an in-cache measurement is requested for
    operands that cannot fit the largest cache (the condition is then
    unattainable and the numbers will look like out-of-cache ones).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    sizes = tuple(int(s) for s in sizes)
    if profile is not None and condition is Condition.IN_CACHE:
        sig = get_signature(kernel)
        total = sum(
            ext.elements * profile.element_bytes
            for ext in extents_for_variant(sig, sizes, variant)
        )
        if total > profile.largest_cache_bytes:
            warnings.warn(
                f"{kernel}{sizes}: operands ({total} B) exceed the largest cache "
                f"({profile.largest_cache_bytes} B); in-cache condition unattainable",
                stacklevel=2,
            )
    cycles = [float(c) for c in backend.collect(kernel, variant, condition, sizes, reps)]
    if len(cycles) != reps:
        raise BackendError(f"backend returned {len(cycles)} timings for reps={reps}")
    return Sample(
        kernel=kernel,
        variant=variant,
        condition=condition,
        point=sizes,
        cycles=tuple(cycles),
        median_cycles=float(statistics.median(cycles)),
    )


def extents_for_variant(sig: KernelSignature, sizes: Sequence[int], variant: VariantKey):
    """Operand extents for a variant key (excluded flags get a default value)."""
    flags = dict(variant.flags)
    for f in sig.flags:
        if f.excluded and f.name not in flags:
            flags[f.name] = f.values[0]  # shape never depends on excluded flags
    return sig.operand_extents(sizes, flags)


# ---------------------------------------------------------------------------
# real-hardware backend (optional)

_F77_CHAR = {"N", "T", "L", "R", "U", "F", "B", "C"}


class SharedLibraryBackend:
    """Times a real BLAS/LAPACK shared library through ctypes.

    Cycle counts are ``elapsed_seconds * frequency_hz``; without a configured
    frequency, nanoseconds are reported (a fixed 1e9 Hz convention), which is
    consistent across conditions and sufficient for ratios and tuning.

    In-cache points run `warmups` untimed executions first; out-of-cache
    points stream a buffer of ``eviction_factor * largest_cache_bytes``
    between repetitions.
    """

    def __init__(
        self,
        library: str,
        profile: MachineProfile,
        *,
        frequency_hz: float = 1e9,
        warmups: int = 2,
        eviction_factor: float = 2.0,
        seed: int = 0,
    ):
        import ctypes

        if warmups < 2:
            raise ValueError("in-cache warming needs at least 2 untimed executions")
        if eviction_factor < 2.0:
            raise ValueError("eviction buffer must be at least twice the largest cache")
        try:
            self._lib = ctypes.CDLL(library)
        except OSError as exc:
            raise ResourceError(f"cannot load shared library {library!r}: {exc}") from exc
        self.library = library
        self.profile = profile
        self.frequency_hz = float(frequency_hz)
        self.warmups = int(warmups)
        self._evict = np.zeros(
            max(1, int(eviction_factor * profile.largest_cache_bytes) // 8), dtype=np.float64
        )
        self._rng = np.random.default_rng(seed)
        self._ctypes = ctypes

    def _symbol(self, name: str):
        try:
            return getattr(self._lib, name + "_")
        except AttributeError as exc:
            raise ResourceError(f"{self.library}: missing symbol {name}_") from exc

    def _flush(self) -> None:
        self._evict += 1.0  # stream the whole buffer, evicting prior operands

    def _build_args(self, kernel, variant, sizes):
        """Allocate operands and the f77 argument list for one kernel call."""
        ct = self._ctypes
        flags = dict(variant.flags)
        sig = get_signature(kernel)
        exts = {e.name: e for e in extents_for_variant(sig, tuple(sizes), variant)}

        def mat(name, spd=False, tri=False):
            e = exts[name]
            a = np.asfortranarray(self._rng.standard_normal((e.rows, e.cols)))
            if spd or tri:
                d = min(e.rows, e.cols)
                a[np.arange(d), np.arange(d)] += e.rows  # keep solves/factorizations stable
            return a

        def ref_i(v):
            return ct.byref(ct.c_int(int(v)))

        def ref_d(v):
            return ct.byref(ct.c_double(float(v)))

        def ch(v):
            return ct.c_char_p(v.encode())

        def ptr(a):
            return a.ctypes.data_as(ct.POINTER(ct.c_double))

        one = ct.c_size_t(1)
        if kernel == "dgemm":
            m, n, k = sizes
            A, B, C = mat("A"), mat("B"), mat("C")
            args = (
                ch(flags["transA"]), ch(flags["transB"]), ref_i(m), ref_i(n), ref_i(k),
                ref_d(1.0), ptr(A), ref_i(A.shape[0]), ptr(B), ref_i(B.shape[0]),
                ref_d(1.0), ptr(C), ref_i(C.shape[0]), one, one,
            )
            return "dgemm", args, (A, B, C)
        if kernel in ("dtrsm", "dtrmm"):
            m, n = sizes
            A, B = mat("A", tri=True), mat("B")
            args = (
                ch(flags["side"]), ch(flags["uplo"]), ch(flags["transA"]), ch("N"),
                ref_i(m), ref_i(n), ref_d(1.0), ptr(A), ref_i(A.shape[0]),
                ptr(B), ref_i(B.shape[0]), one, one, one, one,
            )
            return kernel, args, (A, B)
        if kernel == "dsyrk":
            n, k = sizes
            A, C = mat("A"), mat("C", spd=True)
            args = (
                ch(flags["uplo"]), ch(flags["trans"]), ref_i(n), ref_i(k),
                ref_d(1.0), ptr(A), ref_i(A.shape[0]), ref_d(1.0), ptr(C), ref_i(C.shape[0]),
                one, one,
            )
            return "dsyrk", args, (A, C)
        if kernel == "dcopy":
            (n,) = sizes
            x = self._rng.standard_normal(n)
            y = np.zeros(n)
            args = (ref_i(n), ptr(x), ref_i(1), ptr(y), ref_i(1))
            return "dcopy", args, (x, y)
        if kernel == "dpotf2":
            (n,) = sizes
            A = mat("A", spd=True)
            A = np.asfortranarray(A @ A.T + n * np.eye(n))
            info = ct.c_int(0)
            args = (ch(flags["uplo"]), ref_i(n), ptr(A), ref_i(n), ct.byref(info), one)
            return "dpotf2", args, (A,)
        if kernel == "dgeqr2":
            m, n = sizes
            A = mat("A")
            tau = np.zeros(min(m, n))
            work = np.zeros(max(1, n))
            info = ct.c_int(0)
            args = (ref_i(m), ref_i(n), ptr(A), ref_i(m), ptr(tau), ptr(work), ct.byref(info))
            return "dgeqr2", args, (A, tau, work)
        if kernel == "dlarft":
            n, k = sizes
            V = mat("V")
            tau = self._rng.standard_normal(k)
            T = np.asfortranarray(np.zeros((k, k)))
            args = (
                ch(flags["direct"]), ch(flags["storev"]), ref_i(n), ref_i(k),
                ptr(V), ref_i(V.shape[0]), ptr(tau), ptr(T), ref_i(k), one, one,
            )
            return "dlarft", args, (V, tau, T)
        raise BackendError(f"shared-library backend does not drive kernel {kernel!r}")

    def collect(self, kernel, variant, condition, sizes, reps):
        import time

        symbol_name, args, bufs = self._build_args(kernel, variant, sizes)
        fn = self._symbol(symbol_name)
        out = []
        if condition is Condition.IN_CACHE:
            for _ in range(self.warmups):
                fn(*args)
        for _ in range(reps):
            if condition is Condition.OUT_OF_CACHE:
                self._flush()
            t0 = time.perf_counter_ns()
            fn(*args)
            t1 = time.perf_counter_ns()
            out.append((t1 - t0) * 1e-9 * self.frequency_hz)
        del bufs
        return out
