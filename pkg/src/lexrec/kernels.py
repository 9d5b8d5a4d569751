"""Kernel backend selection.

The compiled extension is used when it was built; set ``LEXREC_PURE_PYTHON=1``
to force the NumPy implementation.
"""
import os

from . import _kernels_py

NEG = _kernels_py.NEG

if os.environ.get("LEXREC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

viterbi = _impl.viterbi
forward_backward = _impl.forward_backward
log_partition = _impl.log_partition


def backends():
    """Available kernel modules by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
