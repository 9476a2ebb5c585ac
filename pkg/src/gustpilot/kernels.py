"""Backend selection for the simulator kernels.

The compiled extension is used when it imported cleanly; otherwise the
pure-Python implementation takes over.  Set ``GUSTPILOT_PURE_PYTHON=1`` to
force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("GUSTPILOT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

trilinear = _impl.trilinear
integrate = _impl.integrate


def get_backend(name):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
