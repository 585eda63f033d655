"""Kernel backend selection.

The Cython extension is used when it has been built; otherwise the pure-Python
module with identical semantics is loaded. Set ``ROBUST_RDF_PURE=1`` to force
the fallback.
"""

from __future__ import annotations

import os

if os.environ.get("ROBUST_RDF_PURE", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

from . import _kernels_py as pure

BACKEND = "cython" if _impl is not pure else "python"

ba_iterate = _impl.ba_iterate
robust_iterate = _impl.robust_iterate
pfr_trials = _impl.pfr_trials
stream_uniforms = _impl.stream_uniforms
X_STREAM = _impl.X_STREAM
SUPPORT_FLOOR = _impl.SUPPORT_FLOOR


def compiled():
    """The compiled module, or ``None`` when it is unavailable."""
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _kernels
