"""Kernel backend selection.

The compiled extension is used when it has been built; otherwise the numpy
implementations are used.  Setting ``CISLUNAR_NF_PURE_PYTHON=1`` forces the
fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKENDS = {"python": _kernels_py}
try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["cython"] = _compiled

if _compiled is not None and os.environ.get("CISLUNAR_NF_PURE_PYTHON", "") != "1":
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]
mul_into = _impl.mul_into
bracket_into = _impl.bracket_into
eval_slots = _impl.eval_slots
flow = _impl.flow

FLOW_OK = _kernels_py.FLOW_OK
FLOW_UNDERFLOW = _kernels_py.FLOW_UNDERFLOW
FLOW_BLOWUP = _kernels_py.FLOW_BLOWUP
FLOW_MAXSTEPS = _kernels_py.FLOW_MAXSTEPS
HESS_SLOT = _kernels_py.HESS_SLOT
NSLOTS_FIELD = _kernels_py.NSLOTS_FIELD


def backend(name: str):
    """Return the kernel module registered under ``name``."""
    return BACKENDS[name]
