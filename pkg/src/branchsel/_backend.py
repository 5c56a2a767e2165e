"""Pick the chain kernel at import time.

The compiled extension is preferred; set ``BRANCHSEL_BACKEND=python`` to force
the fallback (the benchmark and the parity tests do this per call instead via
:func:`get_kernel`).
"""

import os
import warnings

from . import _pykernels

try:
    from . import _kernels as _ckernels
except ImportError:  # extension not built
    _ckernels = None

AVAILABLE = {"python": _pykernels}
if _ckernels is not None:
    AVAILABLE["cython"] = _ckernels

_requested = os.environ.get("BRANCHSEL_BACKEND", "").strip().lower()
if _requested and _requested not in AVAILABLE:
    warnings.warn(f"BRANCHSEL_BACKEND={_requested!r} unavailable, using default", RuntimeWarning)
    _requested = ""

BACKEND = _requested or ("cython" if _ckernels is not None else "python")


def get_kernel(name=None):
    return AVAILABLE[name or BACKEND]


def run_chain(*args, **kwargs):
    return AVAILABLE[BACKEND].run_chain(*args, **kwargs)
