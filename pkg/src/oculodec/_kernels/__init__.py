"""Tree kernels: compiled when available, pure Python otherwise.

Set ``OCULODEC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _tree_py

if os.environ.get("OCULODEC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _tree_py
else:
    try:
        from . import _tree as _impl
    except ImportError:  # extension not built
        _impl = _tree_py

BACKEND = "compiled" if _impl is not _tree_py else "python"
build_tree = _impl.build_tree
apply_tree = _impl.apply_tree

__all__ = ["BACKEND", "build_tree", "apply_tree"]
