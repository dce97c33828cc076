"""Node-wise numerical kernels with a compiled core and a numpy fallback.

The compiled extension ``_ckernels`` is used when it was built; otherwise
the pure numpy module ``_pykernels`` is used.  Setting the environment
variable ``SPACELIKE_MCF_BACKEND=python`` forces the fallback.

Attributes
----------
BACKEND : str
    ``"cython"`` or ``"python"``.
"""

import os

from . import _pykernels

try:
    if os.environ.get("SPACELIKE_MCF_BACKEND", "").lower() == "python":
        raise ImportError("fallback requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

adapted_frames = _impl.adapted_frames
radial_rhs = _impl.radial_rhs

STATUS_OK = _pykernels.STATUS_OK
STATUS_NOT_SPACELIKE = _pykernels.STATUS_NOT_SPACELIKE
STATUS_DEGENERATE_NORMAL = _pykernels.STATUS_DEGENERATE_NORMAL


def compiled_module():
    """Return the compiled module, or ``None`` when it is not built."""
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


__all__ = ["BACKEND", "adapted_frames", "radial_rhs", "compiled_module",
           "STATUS_OK", "STATUS_NOT_SPACELIKE", "STATUS_DEGENERATE_NORMAL"]
