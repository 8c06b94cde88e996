"""Backend selection for the hot encode+pool kernel.

The compiled extension (`pdl._ckernels`) is preferred when it imported
cleanly; otherwise the pure-numpy twin is used.  Set PDL_PURE_PYTHON=1 to
force the fallback (the benchmark uses this to compare the two).
"""

import os

from pdl import _pykernels

try:
    from pdl import _ckernels
except ImportError:
    _ckernels = None


def _select():
    if _ckernels is None or os.environ.get("PDL_PURE_PYTHON"):
        return _pykernels
    return _ckernels


_impl = _select()

BACKEND = _impl.BACKEND_NAME
encode_pool_image = _impl.encode_pool_image


def get_backend(name=None):
    """Module implementing the kernel contract; `name` forces a choice."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
