"""Performance prediction for blocked dense linear algebra.

Builds piecewise-polynomial runtime models of compute kernels by adaptive
sampling, tracks operand cache residency across kernel-call traces with an
LRU access-distance scan, and blends the two into whole-algorithm runtime
predictions for block-size tuning and algorithm ranking.
"""

from .errors import (
    BackendError,
    DegenerateBox,
    FitError,
    InvalidFlag,
    InvalidLeadingDimension,
    InvalidOperand,
    InvalidScalar,
    InvalidSpec,
    ModelFormatError,
    NoOperands,
    OutOfDomain,
    PerfModelError,
    ResourceError,
    UnknownKernel,
    UnknownVariant,
    VersionError,
)
from .kernels import (
    KernelRegistry,
    KernelSignature,
    ScalarClass,
    VariantKey,
    classify_scalar,
    get_signature,
)
from .regions import ELEMENT_BYTES, RegionSet, submatrix_region, vector_region
from .cachetrack import (
    AccessDistance,
    KernelCall,
    OperandRegion,
    Termination,
    Trace,
    access_distance,
    dump_trace,
    load_trace,
    lru_resident,
    scan_set,
)
from .timing import (
    Backend,
    Condition,
    MachineProfile,
    Sample,
    SharedLibraryBackend,
    SyntheticBackend,
    measure,
)
from .modeler import (
    ErrorMetric,
    GridKind,
    PolyPatch,
    RefinementConfig,
    accuracy_report,
    eval_patch,
    fit_patch,
    gaussian_grid,
    lobatto_points,
    owns_point,
    partition_csv,
    refine,
    split_box,
)
from .store import PerfModel, VariantModel, build_model, dumps, estimate, load, loads, save
from .algorithms import (
    ALGORITHM_IDS,
    AlgorithmSpec,
    call_flops,
    chol_trace,
    efficiency,
    generate_trace,
    kernel_flops,
    qr_trace,
    trace_flops,
)
from .predictor import (
    CallPrediction,
    TracePrediction,
    blend,
    cache_association,
    predict_trace,
    report_csv,
    smooth,
)
from .synthetic import Ramp, Step, SyntheticCost, make_exact_model
from .tuner import RankEntry, TuneResult, curve_csv, rank_algorithms, ranking_csv, tune_blocksize
from ._core import IMPL as SCAN_IMPL

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
