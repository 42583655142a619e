"""Hot-loop kernels, compiled when available.

The Cython extension ``_kernels`` is used when it imports; otherwise the
pure-Python ``_fallback`` is selected. Setting ``MG1SOCP_PURE_PYTHON=1``
forces the fallback.
"""
import os

from mg1socp import _fallback as fallback

compiled = None
if os.environ.get("MG1SOCP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from mg1socp import _kernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else fallback

COMPILED = compiled is not None
lindley = _impl.lindley
best_assignment = _impl.best_assignment

__all__ = ["COMPILED", "best_assignment", "compiled", "fallback", "lindley"]
