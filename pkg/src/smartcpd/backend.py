"""Selection between the compiled kernel core and the NumPy fallback.

The compiled module ``smartcpd._core`` is preferred when importable.
``SMARTCPD_BACKEND=python`` or ``SMARTCPD_BACKEND=c`` forces a choice;
forcing ``c`` without a built extension is an error.
"""

import os

from . import _kernels_py

_available = {"python": _kernels_py}
try:
    from . import _core

    _available["c"] = _core
except ImportError:
    pass


def _select():
    choice = os.environ.get("SMARTCPD_BACKEND", "auto").lower()
    if choice == "auto":
        return _available.get("c", _kernels_py)
    if choice not in _available:
        raise RuntimeError(
            f"SMARTCPD_BACKEND={choice!r} requested but only "
            f"{sorted(_available)} are available"
        )
    return _available[choice]


_active = _select()


def available_backends():
    return sorted(_available)


def active_name():
    return _active.BACKEND_NAME


def kernels():
    """The active kernel module."""
    return _active


def set_backend(name):
    """Switch kernels at runtime (used by tests and benchmarks)."""
    global _active
    if name not in _available:
        raise RuntimeError(f"backend {name!r} not available (have {sorted(_available)})")
    _active = _available[name]
    return _active
