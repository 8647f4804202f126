"""Training-free compositional caching for open-vocabulary attribute detection.

The pipeline ingests precomputed unit-norm embeddings, estimates
attribute-object compatibility from caption statistics and LLM scores,
builds a retrieval cache with blended soft labels, and refines zero-shot
attribute scores, with an mAP harness for evaluation.
"""

from ._kernels import BACKEND as kernel_backend
from .cachebuild import (
    Cache,
    CacheEntry,
    build_cache,
    build_image_cache,
    build_query,
    load_cache,
    retrieve_for_query,
    sample_objects,
    save_cache,
)
from .compat import (
    AttributeDistribution,
    CompatibilityTable,
    MatchConfig,
    count_cooccurrences,
    fuse_scores,
    normalize_distribution,
)
from .config import RunConfig
from .embeddings import (
    AttributeEntry,
    EmbeddingMatrix,
    Vocabulary,
    cosine,
    l2_normalize,
    load_embeddings,
    save_embeddings,
    similarity_matrix,
)
from .evaluation import AnnotationSet, EvalResult, average_precision, evaluate
from .labeling import (
    LabelMatrix,
    blend_labels,
    cache_statistics,
    make_labels,
    normalize_soft_labels,
    one_hot_labels,
    raw_soft_labels,
)
from .llm import LlmConfig, ScoreCache, llm_score_pairs
from .scoring import (
    HyperParams,
    ScoreMatrix,
    comca_cache_scores,
    eta_c,
    fuse_final,
    iap_scores,
    image_based_scores,
    load_scores,
    save_scores,
    tip_cache_scores,
    zero_shot_scores,
)

__version__ = "0.1.0"
