"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

Set EGODEPTH_KERNEL=numpy to force the fallback (used by the benchmark and
by tests that compare the two backends).
"""

import os

from ._bilinear_np import bilinear_sample_grad as _bilinear_np

try:
    from ._bilinear_fast import bilinear_sample_grad as _bilinear_fast
except ImportError:
    _bilinear_fast = None

if _bilinear_fast is not None and os.environ.get("EGODEPTH_KERNEL") != "numpy":
    bilinear_sample_grad = _bilinear_fast
    BACKEND = "compiled"
else:
    bilinear_sample_grad = _bilinear_np
    BACKEND = "numpy"


def available_backends():
    """Name -> kernel mapping for every importable backend."""
    backends = {"numpy": _bilinear_np}
    if _bilinear_fast is not None:
        backends["compiled"] = _bilinear_fast
    return backends
