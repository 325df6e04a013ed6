"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``STRATOS_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the NumPy implementations are used.
"""
from __future__ import annotations

import os

from . import _kernels_py

_force_py = os.environ.get("STRATOS_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

cluster_modes = _impl.cluster_modes
cluster_loglik = _impl.cluster_loglik
agq_log_integrals = _impl.agq_log_integrals
rank_sum_counts = _impl.rank_sum_counts
agq_posterior_residuals = _impl.agq_posterior_residuals


def backends():
    """Available backends as ``{name: module}``."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
