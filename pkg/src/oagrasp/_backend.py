"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
kernels are. Set ``OAGRASP_BACKEND=python`` to force the fallback, or
``OAGRASP_BACKEND=ext`` to fail loudly when the extension is missing.
"""
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_requested = os.environ.get("OAGRASP_BACKEND", "auto").lower()

if _requested == "python":
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels
        BACKEND = "ext"
    except ImportError:
        if _requested == "ext":
            raise
        log.debug("compiled kernels unavailable, using pure-Python fallback")
        kernels = _pykernels
        BACKEND = "python"


def available_backends():
    names = {"python": _pykernels}
    try:
        from . import _ckernels
        names["ext"] = _ckernels
    except ImportError:
        pass
    return names
