"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy versions in ``_pykernels``.  Set ``QUASITREE_PURE_PYTHON=1`` to force
the fallback.
"""
import importlib
import os

from quasitree import _pykernels

_NAMES = ("modified_table", "monotonicity_violations", "bfs_all_pairs", "reachable")


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("quasitree._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    found = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        found.insert(0, "cython")
    return found


if os.environ.get("QUASITREE_PURE_PYTHON") == "1":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        _impl = load_backend("cython")
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

modified_table = _impl.modified_table
monotonicity_violations = _impl.monotonicity_violations
bfs_all_pairs = _impl.bfs_all_pairs
reachable = _impl.reachable

__all__ = ["BACKEND", "available_backends", "load_backend", *_NAMES]
