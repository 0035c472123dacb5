"""Backend selection for the decode kernels.

Prefers the compiled extension; falls back to the pure-numpy
implementation when it is not built. Set CHANSIM_PURE=1 to force the
fallback (used by the equivalence tests and the benchmark).
"""

import os

if os.environ.get("CHANSIM_PURE"):
    from . import _kernels_py as _impl

    BACKEND = "pure"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "pure"

STATUS_EXACT = _impl.STATUS_EXACT
STATUS_CORRECTED = _impl.STATUS_CORRECTED
STATUS_UNCORRECTABLE = _impl.STATUS_UNCORRECTABLE
STATUS_AMBIGUOUS = _impl.STATUS_AMBIGUOUS

distance_matrix = _impl.distance_matrix
decode_batch = _impl.decode_batch
