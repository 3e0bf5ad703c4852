"""Backend selection for the scan kernels.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy implementation in ``_pure`` takes over.  Set
``ADAPTIVE_SEQSTEP_PURE=1`` to force the fallback.
"""

import os

from . import _pure

if os.environ.get("ADAPTIVE_SEQSTEP_PURE", "") not in ("", "0"):
    _impl = _pure
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _pure

BACKEND = "cython" if _impl is not _pure else "python"

as_path = _impl.as_path
at_path = _impl.at_path
stop_index = _impl.stop_index
as_batch = _impl.as_batch
at_batch = _impl.at_batch

__all__ = ["BACKEND", "as_path", "at_path", "stop_index", "as_batch", "at_batch"]
