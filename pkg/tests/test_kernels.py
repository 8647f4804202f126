import numpy as np
import pytest

from comca import _kernels
from comca._kernels import fallback


@pytest.mark.parametrize("label_as_weight", [True, False])
@pytest.mark.parametrize("shape", [(1, 1, 1), (5, 7, 3), (16, 32, 8),
                                   (3, 50, 20)])
def test_backends_agree(label_as_weight, shape, rng):
    n, c, a = shape
    sim = rng.uniform(-1, 1, size=(n, c))
    labels = rng.uniform(0, 1, size=(c, a))
    via_dispatch = _kernels.cache_scores(sim, labels, -1.0, 1.0,
                                         label_as_weight)
    via_fallback = fallback.cache_scores(sim, labels, -1.0, 1.0,
                                         label_as_weight)
    np.testing.assert_allclose(via_dispatch, via_fallback, atol=1e-12)


def test_fallback_chunking_matches_unchunked(rng, monkeypatch):
    sim = rng.uniform(-1, 1, size=(13, 9))
    labels = rng.uniform(0, 1, size=(9, 4))
    full = fallback.cache_scores(sim, labels, -1.0, 1.0, False)
    monkeypatch.setattr(fallback, "_CHUNK_BUDGET", 40)  # forces tiny chunks
    chunked = fallback.cache_scores(sim, labels, -1.0, 1.0, False)
    np.testing.assert_allclose(chunked, full, atol=1e-12)


@pytest.mark.skipif(not _kernels.HAVE_EXT, reason="extension not built")
def test_extension_rejects_mismatched_shapes(rng):
    sim = rng.uniform(-1, 1, size=(2, 3))
    labels = rng.uniform(0, 1, size=(4, 2))  # wrong row count
    with pytest.raises(ValueError):
        _kernels.cache_scores(sim, labels, -1.0, 1.0, False)


def test_zero_rows():
    sim = np.zeros((0, 4))
    labels = np.ones((4, 2))
    out = _kernels.cache_scores(sim, labels, -1.0, 1.0, True)
    assert out.shape == (0, 2)
