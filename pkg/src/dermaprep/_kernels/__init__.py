"""Hot pixel kernels with two interchangeable backends.

The numba backend JIT-compiles the inner loops and is the default. Setting
``DERMAPREP_BACKEND=numpy`` forces the pure-numpy implementation (also used
automatically when numba is not importable). Both backends expose the same
functions and produce identical results; ``benchmarks/bench_kernels.py``
compares their speed.
"""

import os

_requested = os.environ.get("DERMAPREP_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from . import numba_impl as _impl
    except ImportError:
        from . import numpy_impl as _impl
elif _requested == "numba":
    from . import numba_impl as _impl
elif _requested == "numpy":
    from . import numpy_impl as _impl
else:
    raise RuntimeError(
        f"DERMAPREP_BACKEND={_requested!r} not recognized (use 'numba' or 'numpy')"
    )

BACKEND = _impl.BACKEND

binary_dilate = _impl.binary_dilate
binary_erode = _impl.binary_erode
gray_dilate = _impl.gray_dilate
gray_erode = _impl.gray_erode
fill_holes = _impl.fill_holes
drop_small_components = _impl.drop_small_components
median_fill = _impl.median_fill
min_mse_scan = _impl.min_mse_scan
