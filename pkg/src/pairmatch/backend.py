"""Kernel backend selection.

The hot inner loops (conv1d, masked pooling, Adam updates) exist twice:
jitted in ``_kernels_numba`` and vectorized in ``_kernels_numpy``.  The
environment variable ``PAIRMATCH_BACKEND`` picks one:

    PAIRMATCH_BACKEND=numba   force the jitted kernels (error if unavailable)
    PAIRMATCH_BACKEND=numpy   force the pure-numpy fallback
    unset / "auto"            numba when it imports, numpy otherwise

``benchmarks/bench_kernels.py`` compares both paths.
"""

import os

_requested = os.environ.get("PAIRMATCH_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        from . import _kernels_numpy as _impl

        BACKEND = "numpy"
elif _requested == "numba":
    from . import _kernels_numba as _impl

    BACKEND = "numba"
elif _requested == "numpy":
    from . import _kernels_numpy as _impl

    BACKEND = "numpy"
else:
    raise ValueError(
        f"PAIRMATCH_BACKEND must be 'numba', 'numpy' or 'auto', got {_requested!r}"
    )

conv1d_same_forward = _impl.conv1d_same_forward
conv1d_same_backward = _impl.conv1d_same_backward
masked_max_forward = _impl.masked_max_forward
masked_max_backward = _impl.masked_max_backward
masked_avg_forward = _impl.masked_avg_forward
masked_avg_backward = _impl.masked_avg_backward
adam_update = _impl.adam_update
