"""Backend selection for the drop-tail kernel.

The compiled extension is used when it was built; otherwise the pure-Python
version. Set ``BURSTGATE_PURE=1`` to force the fallback.
"""

import os

from . import _pykernel

try:
    if os.environ.get("BURSTGATE_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _ckernel as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernel
    BACKEND = "python"

droptail = _impl.droptail
py_droptail = _pykernel.droptail


def available_backends():
    out = {"python": _pykernel.droptail}
    try:
        from . import _ckernel

        out["cython"] = _ckernel.droptail
    except ImportError:
        pass
    return out
