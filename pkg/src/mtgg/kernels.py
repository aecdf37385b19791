"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is. Set ``MTGG_BACKEND=python`` to force the fallback.
"""

import importlib
import os

_REQUESTED = os.environ.get("MTGG_BACKEND", "").strip().lower()

if _REQUESTED == "python":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

switching_roots = _impl.switching_roots
local_payoffs = _impl.local_payoffs


def available_backends():
    names = ["python"]
    try:
        importlib.import_module("mtgg._kernels")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Kernel module for ``name`` ("cython" or "python")."""
    if name == "python":
        return importlib.import_module("mtgg._kernels_py")
    if name == "cython":
        return importlib.import_module("mtgg._kernels")
    raise ValueError(f"unknown backend {name!r}")
