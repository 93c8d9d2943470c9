"""Kernel backend selection.

The compiled extension is used when it was built; setting the environment
variable ``SUPOUSV_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("SUPOUSV_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # noqa: F811
    except ImportError:  # extension not built
        _impl = _pykernels
    else:
        BACKEND = "cython"

drift_tables = _impl.drift_tables
near_pair_sum = _impl.near_pair_sum
advance_block = _impl.advance_block


def get_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
