"""Selects the compiled midpoint kernel when it is importable.

Set ``PIEZO_LAB_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
import os

from . import _midpoint_py

_KERNELS = {"python": _midpoint_py.midpoint_run}

try:
    from . import _midpoint
except ImportError:  # extension not built
    _midpoint = None
else:
    _KERNELS["compiled"] = _midpoint.midpoint_run

if os.environ.get("PIEZO_LAB_PURE_PYTHON", "") not in ("", "0"):
    DEFAULT = "python"
else:
    DEFAULT = "compiled" if "compiled" in _KERNELS else "python"


def available() -> tuple[str, ...]:
    return tuple(_KERNELS)


def get(name: str | None = None):
    name = name or DEFAULT
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {available()}") from None
