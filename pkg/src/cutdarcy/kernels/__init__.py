"""Element-kernel lanes.

Two interchangeable implementations of the hot per-element loops exist: a
compiled lane (:mod:`.numba_impl`) and a pure-numpy lane
(:mod:`.numpy_impl`).  The environment variable ``CUTDARCY_KERNELS`` picks
the default lane (``numba`` unless set to ``numpy``); when numba is not
importable the numpy lane is used silently.  :func:`get_kernels` returns the
chosen module so callers stay lane-agnostic, and tests can request a lane
explicitly to compare the two.
"""

from __future__ import annotations

import os
from types import ModuleType

from ..errors import InvalidArgumentError
from . import numpy_impl

_NUMBA_MOD: ModuleType | None = None
_NUMBA_TRIED = False


def _numba_module() -> ModuleType | None:
    global _NUMBA_MOD, _NUMBA_TRIED
    if not _NUMBA_TRIED:
        _NUMBA_TRIED = True
        try:
            from . import numba_impl
            _NUMBA_MOD = numba_impl
        except ImportError:
            _NUMBA_MOD = None
    return _NUMBA_MOD


def get_kernels(lane: str | None = None) -> ModuleType:
    """Return the kernel module for `lane` (default: the env-selected one)."""
    if lane is None:
        lane = os.environ.get("CUTDARCY_KERNELS", "numba").strip().lower()
        if lane not in ("numba", "numpy"):
            raise InvalidArgumentError(
                f"CUTDARCY_KERNELS must be 'numba' or 'numpy', got {lane!r}")
        if lane == "numba" and _numba_module() is None:
            lane = "numpy"
    if lane == "numpy":
        return numpy_impl
    if lane == "numba":
        mod = _numba_module()
        if mod is None:
            raise InvalidArgumentError("numba lane requested but numba is not importable")
        return mod
    raise InvalidArgumentError(f"unknown kernel lane {lane!r}")


def active_lane() -> str:
    """Name of the lane `get_kernels()` resolves to right now."""
    return get_kernels().LANE
