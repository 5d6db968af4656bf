"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise
the numpy fallback serves. Both expose points_clear/segments_clear with
identical semantics, so callers never need to know which one is active.
"""

from __future__ import annotations

from types import ModuleType

from . import _kernels_py

try:
    from . import _kernels_cy  # type: ignore[attr-defined]
except ImportError:
    _kernels_cy = None

KERNEL_BACKEND = "compiled" if _kernels_cy is not None else "pure"


def get_kernels(prefer: str | None = None) -> ModuleType:
    """Return the kernel module for ``prefer`` ("compiled", "pure", or
    None for the default). Asking for the compiled backend when it did
    not build raises RuntimeError."""
    if prefer in (None, "auto"):
        return _kernels_cy if _kernels_cy is not None else _kernels_py
    if prefer == "pure":
        return _kernels_py
    if prefer == "compiled":
        if _kernels_cy is None:
            raise RuntimeError("compiled kernels are not available in this install")
        return _kernels_cy
    raise ValueError(f"unknown kernel backend {prefer!r}")
