"""Backend selection for the boundary-matrix reduction kernel.

The compiled kernel is used when importable; setting ``PLLAY_PURE_PYTHON=1``
forces the pure-Python fallback.
"""
import os

from . import _reduction_py

BACKEND = "python"
reduce_python = _reduction_py.reduce_boundary
reduce_compiled = None

try:
    from ._reduction import reduce_boundary as reduce_compiled  # type: ignore
except ImportError:  # pragma: no cover - depends on build
    reduce_compiled = None

if reduce_compiled is not None and not os.environ.get("PLLAY_PURE_PYTHON"):
    reduce_boundary = reduce_compiled
    BACKEND = "cython"
else:
    reduce_boundary = reduce_python
