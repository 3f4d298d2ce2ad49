"""Hot sampling kernels: compiled Cython when available, numpy otherwise.

Set ``COVMATCH_PURE_PYTHON=1`` to force the numpy fallback.  ``BACKEND``
names the implementation selected at import.
"""
import os

from . import _pykernels as python_kernels

try:
    if os.environ.get("COVMATCH_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as cython_kernels
except ImportError:
    cython_kernels = None

_impl = cython_kernels if cython_kernels is not None else python_kernels
BACKEND = "cython" if cython_kernels is not None else "python"

lc_fill = _impl.lc_fill
tail_sup = _impl.tail_sup

__all__ = ["BACKEND", "lc_fill", "tail_sup", "python_kernels", "cython_kernels"]
