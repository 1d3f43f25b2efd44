"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``CONFGEN_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
pure-Python module is used. Both expose the same three functions.
"""
import os

from confgen import _kernels_py


def _load():
    if os.environ.get("CONFGEN_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py
    try:
        from confgen import _kernels
    except ImportError:
        return _kernels_py
    return _kernels


kernels = _load()
python_kernels = _kernels_py


def compiled_kernels():
    """The compiled module, or None when it is not built."""
    try:
        from confgen import _kernels
    except ImportError:
        return None
    return _kernels


def name() -> str:
    return kernels.BACKEND
