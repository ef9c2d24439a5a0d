"""Backend selection for the sampling kernels.

The compiled ``_ckernels`` module is used when it imports; otherwise the
pure-Python ``_pykernels``. Set ``ABTREE_PURE_PYTHON=1`` to force the
fallback.
"""
import os

from . import _pykernels

if os.environ.get("ABTREE_PURE_PYTHON"):
    backend = _pykernels
else:
    try:
        from . import _ckernels as backend
    except ImportError:
        backend = _pykernels

BACKEND_NAME = "compiled" if backend is not _pykernels else "python"

cover_trees = backend.cover_trees
wilson_trees = backend.wilson_trees
tree_chain_codes = backend.tree_chain_codes
