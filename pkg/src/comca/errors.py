"""Exception taxonomy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
contract (0 ok, 1 config, 2 data, 3 network, 4 internal).
"""


class ComcaError(Exception):
    exit_code = 4


class ConfigError(ComcaError):
    exit_code = 1


class DataError(ComcaError):
    exit_code = 2


class NetworkError(ComcaError):
    exit_code = 3


# --- embedding kernels / containers ---

class ZeroVector(DataError):
    """Vector with L2 norm below 1e-12 cannot be normalized."""


class DimMismatch(DataError):
    """Operands disagree on embedding dimensionality."""


class ContainerFormat(DataError):
    """Embedding container file violates the binary layout."""


# --- compatibility estimation ---

class CorpusFormat(DataError):
    """Malformed caption record (per-record; counting skips and tallies these)."""


class EmptyVocabulary(DataError):
    pass


class LlmTransport(NetworkError):
    """Endpoint unreachable or persistent HTTP failure after retries."""


class LlmParse(DataError):
    """Response line could not be matched to a requested category."""


class MissingScore(DataError):
    """A pair has no score after retries and repair queries."""


class NegativeScore(DataError):
    pass


class ShapeMismatch(DataError):
    pass


# --- cache construction ---

class MissingQueryEmbedding(DataError):
    """A sampled (attribute, object) pair has no precomputed query embedding."""


class PoolExhausted(DataError):
    """Every pool image is excluded from retrieval."""


class UnknownPlaceholder(ConfigError):
    """Query template references a placeholder that is not provided."""


# --- labeling / scoring ---

class EmptyCache(DataError):
    pass


class DegenerateStatistics(DataError):
    """All cache-attribute similarities identical; standardization undefined."""


class AlphaOutOfRange(ConfigError):
    pass


class DegenerateRow(DataError):
    """Fused score row whose maximum is not positive."""


class NotStochastic(DataError):
    """Row sums deviate from 1 beyond tolerance."""


# --- evaluation ---

class NoPositives(DataError):
    """Attribute has no positive labels after unknown masking."""


class Misalignment(DataError):
    """Scores and annotations disagree on instances or attributes."""


class AllAttributesSkipped(DataError):
    pass


class ComcaWarning(UserWarning):
    """Category for contract-level warnings (renormalization, fallbacks)."""
