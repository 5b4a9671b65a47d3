"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. Set ``MCSQKD_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("MCSQKD_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

fock_product = _impl.fock_product
segment_pattern_sums = _impl.segment_pattern_sums

__all__ = ["BACKEND", "fock_product", "segment_pattern_sums"]
