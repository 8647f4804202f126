"""Pure numpy cache-scoring kernel.

The fused form exp(u + v * (label * sim)) has no single-matmul shape, so
this backend materializes an (instances, cache, attributes) block; it
chunks over instances to bound the temporary at roughly 64 MB.
"""

import numpy as np

_CHUNK_BUDGET = 8_000_000  # float64 elements per temporary block


def cache_scores(sim: np.ndarray, labels: np.ndarray, u: float, v: float,
                 label_as_weight: bool) -> np.ndarray:
    sim = np.asarray(sim, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if label_as_weight:
        return np.exp(u + v * sim) @ labels
    n = sim.shape[0]
    n_attrs = labels.shape[1]
    out = np.empty((n, n_attrs))
    chunk = max(1, _CHUNK_BUDGET // max(1, labels.size))
    for start in range(0, n, chunk):
        block = sim[start:start + chunk, :, None] * labels[None, :, :]
        np.exp(u + v * block, out=block)
        out[start:start + chunk] = block.sum(axis=1)
    return out
