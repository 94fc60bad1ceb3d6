"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension ``_core`` is used when it was built; otherwise, or
when ``WDNTSP_PURE_PYTHON=1`` is set, the numpy versions in ``_fallback``
are selected.  ``BACKEND`` names the active choice.
"""

import os

from . import _fallback
from ._ordering import round_robin


def _load_compiled():
    try:
        from . import _core
    except ImportError:
        return None
    return _core


_compiled = None if os.environ.get("WDNTSP_PURE_PYTHON") == "1" else _load_compiled()

if _compiled is not None:
    jacobi = _compiled.jacobi
    bfs_tree = _compiled.bfs_tree
    BACKEND = "compiled"
else:
    jacobi = _fallback.jacobi
    bfs_tree = _fallback.bfs_tree
    BACKEND = "python"


def backends():
    """Map of every importable backend name to its module."""
    found = {"python": _fallback}
    core = _load_compiled()
    if core is not None:
        found["compiled"] = core
    return found


__all__ = ["BACKEND", "backends", "bfs_tree", "jacobi", "round_robin"]
