"""Backend selection for the load-coupling hot kernels.

The compiled Cython core is used when it has been built; otherwise the
numpy implementation in ``_kernels_py`` is used.  Setting the environment
variable ``JTENERGY_PURE_PYTHON=1`` forces the numpy path.
"""
import os

from . import _kernels_py

if os.environ.get("JTENERGY_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
STATUS_CONVERGED = _impl.STATUS_CONVERGED
STATUS_DIVERGED = _impl.STATUS_DIVERGED
STATUS_ITERATION_CAP = _impl.STATUS_ITERATION_CAP
STATUS_EXCEEDED = _impl.STATUS_EXCEEDED

sinr = _impl.sinr
load_map = _impl.load_map
fixed_point = _impl.fixed_point
link_probe = _impl.link_probe

__all__ = ["BACKEND", "sinr", "load_map", "fixed_point", "link_probe"]
