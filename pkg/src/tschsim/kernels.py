"""Backend selection for the hot per-decision kernel.

The compiled extension is used when importable; set ``TSCHSIM_PURE_PYTHON=1``
to force the pure-Python implementation.
"""

import os

from . import _kernels_py



def forced_python() -> bool:
    return os.environ.get("TSCHSIM_PURE_PYTHON", "") not in ("", "0")


if forced_python():
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
neighbor_features = _impl.neighbor_features
python_neighbor_features = _kernels_py.neighbor_features


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True
