"""Backend selection for the dual-descent loop.

The compiled extension is preferred; set ``CMDPLAB_BACKEND=python`` to force
the pure-Python loop.
"""
import logging
import os

from . import _dual_loop_py

log = logging.getLogger(__name__)

try:
    from . import _dual_loop as _compiled
except ImportError:  # extension not built
    _compiled = None

HAVE_COMPILED = _compiled is not None
BACKENDS = ("compiled", "python")


def default_backend():
    choice = os.environ.get("CMDPLAB_BACKEND", "").strip().lower()
    if choice == "python" or not HAVE_COMPILED:
        return "python"
    return "compiled"


def get_kernel(backend=None):
    backend = backend or default_backend()
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel requested but cmdplab._dual_loop is not built")
        return _compiled
    return _dual_loop_py
