"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Set ``AIRCOMP_DISABLE_NUMBA=1`` before import to force the numpy path
(useful on machines without a working compiler, and for benchmarking via
``benchmarks/bench_kernels.py``).
"""

import os

from . import _numpy

USING_NUMBA = os.environ.get("AIRCOMP_DISABLE_NUMBA", "0") not in ("1", "true", "yes")

if USING_NUMBA:
    try:
        from . import _numba as _impl
    except ImportError:  # numba unavailable
        USING_NUMBA = False
        _impl = _numpy
else:
    _impl = _numpy

chol_factor = _impl.chol_factor
chol_solve = _impl.chol_solve
accumulate_gram = _impl.accumulate_gram
mse_chunk = _impl.mse_chunk
barrier_solve = _impl.barrier_solve

__all__ = ["USING_NUMBA", "chol_factor", "chol_solve", "accumulate_gram",
           "mse_chunk", "barrier_solve"]
