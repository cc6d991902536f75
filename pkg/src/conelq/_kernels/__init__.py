"""Numerical kernels with two interchangeable backends.

`_np` is the pure-numpy reference; `_cy` is an optionally compiled Cython
twin mirroring it operation for operation (same formulas, same association
order, compiled with FP contraction off), so both produce bitwise-identical
results. Selection happens once at import:

  CONELQ_BACKEND=auto      compiled if available, else python (default)
  CONELQ_BACKEND=python    force the numpy reference
  CONELQ_BACKEND=compiled  require the extension; fail loudly if missing

The scalar minimizers (`hmin_scalar` & co.) and the half-grid interpolation
helpers are backend-independent and always come from the python side.
"""

from __future__ import annotations

import os

from ..errors import SchemaError
from . import _np
from ._np import half_linear, half_cubic  # noqa: F401  (re-export)
from .hmin import (  # noqa: F401  (re-export)
    hmin_scalar,
    hmin_vector,
    quadmin_scalar,
    quadmin_vector,
)

try:
    from . import _cy as _compiled
except ImportError:
    _compiled = None


def _select():
    requested = os.environ.get("CONELQ_BACKEND", "auto")
    if requested not in ("auto", "python", "compiled"):
        raise SchemaError(
            f"CONELQ_BACKEND must be auto/python/compiled, got {requested!r}"
        )
    if requested == "python":
        return _np, "python"
    if requested == "compiled":
        if _compiled is None:
            raise SchemaError(
                "CONELQ_BACKEND=compiled but the extension module is not built"
            )
        return _compiled, "compiled"
    if _compiled is not None:
        return _compiled, "compiled"
    return _np, "python"


_impl, _name = _select()


def backend_name() -> str:
    """Which kernel backend this process selected at import time."""
    return _name


triangle_separable = _impl.triangle_separable
pre_pair = _impl.pre_pair
sim_blocks = _impl.sim_blocks
