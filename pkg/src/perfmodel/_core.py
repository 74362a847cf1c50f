"""Select the scan implementation: compiled extension or pure fallback.

Set ``PERFMODEL_PURE=1`` to force the numpy fallback even when the compiled
core is available (used by the benchmark and for debugging).
"""

import os

if os.environ.get("PERFMODEL_PURE"):
    from . import _scan_py as _impl
else:
    try:
        from . import _scan as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _scan_py as _impl

IMPL = _impl.IMPL
FOUND = _impl.FOUND
EXCEEDED = _impl.EXCEEDED
TRACE_START = _impl.TRACE_START
scan_access_distance = _impl.scan_access_distance
