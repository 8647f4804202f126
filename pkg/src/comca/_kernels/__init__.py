"""Scoring-kernel backend selection.

Two algebraic forms exist: the fused ``sum_c exp(u + v * label * sim)``,
which numpy can only do through a large (instances, cache, attributes)
temporary, and the weighted ``exp(u + v * sim) @ labels``, which is a
single BLAS matmul. The compiled extension wins on the fused form
(roughly 2x, see benchmarks/bench_kernels.py) and loses badly to BLAS on
the matmul form, so dispatch routes each form to its best backend. Set
COMCA_NO_EXT=1 to force the numpy fallback everywhere.
"""

import os

import numpy as np

from . import fallback

try:
    from . import _cachescore as _ext
    HAVE_EXT = True
except ImportError:
    _ext = None
    HAVE_EXT = False

USE_EXT = HAVE_EXT and not os.environ.get("COMCA_NO_EXT")

BACKEND = "cython" if USE_EXT else "numpy"


def cache_scores(sim, labels, u: float, v: float,
                 label_as_weight: bool) -> np.ndarray:
    """out[x, a] = sum_c over cache of the eta-weighted contribution."""
    sim = np.ascontiguousarray(sim, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.float64)
    if label_as_weight or not USE_EXT:
        return fallback.cache_scores(sim, labels, u, v, label_as_weight)
    return _ext.cache_scores(sim, labels, u, v, label_as_weight)
