"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``FAIRMATCH_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

IMPLEMENTATION = "python"

if os.environ.get("FAIRMATCH_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        IMPLEMENTATION = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

rr_drain_order = _impl.rr_drain_order
resolve_races = _impl.resolve_races
libra_schedule = _impl.libra_schedule

__all__ = ["IMPLEMENTATION", "rr_drain_order", "resolve_races", "libra_schedule"]
