"""Kernel dispatch: compiled extension when available, numpy otherwise.

The compiled module illumloc._native implements the two hot paths
(ray-triangle intersection and decision-tree build/apply).  When it is
missing, or when ILLUMLOC_KERNELS=python is set, the pure numpy versions
in _kernels_py are used instead.  Both produce identical output;
tests/test_kernels.py checks them against each other bit for bit and
benchmarks/bench_kernels.py compares their speed.
"""

from __future__ import annotations

import os

from . import _kernels_py

# shared helpers that have a single implementation
from ._kernels_py import bootstrap_indices, rand_u64  # noqa: F401

try:
    from . import _native
except ImportError:  # pragma: no cover - depends on install mode
    _native = None

_mode = os.environ.get("ILLUMLOC_KERNELS", "auto")
if _mode not in ("auto", "native", "python"):
    raise RuntimeError(f"ILLUMLOC_KERNELS must be auto|native|python, got {_mode!r}")
if _mode == "native" and _native is None:
    raise RuntimeError("ILLUMLOC_KERNELS=native but illumloc._native is not built")

USING_NATIVE = _native is not None and _mode != "python"
_impl = _native if USING_NATIVE else _kernels_py

ray_triangles = _impl.ray_triangles
tree_build = _impl.tree_build
tree_apply = _impl.tree_apply


def backend_name() -> str:
    return "native" if USING_NATIVE else "python"
