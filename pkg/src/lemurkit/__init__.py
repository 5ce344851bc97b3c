"""Toolkit for multilingual legal-document retrieval experiments.

The package covers four areas:

* ``textnorm`` / ``lcs`` -- HTML stripping, text normalization, and the
  lexical content score that measures PDF-to-text conversion fidelity
  against a reference HTML version.
* ``corpus`` -- loading olmOCR-style JSONL acts, splitting the metadata
  block (the query) from the body, and building aligned train/val/test
  splits plus monolingual pairs or bilingual multi-positive groups.
* ``losses`` -- reference implementations of the symmetric in-batch
  contrastive loss and its grouped multi-positive extension, with
  analytic gradients checked by finite differences.
* ``vindex`` / ``evalkit`` / ``embedclient`` -- an exact cosine vector
  index with token-cap truncation, top-k retrieval evaluation, and a
  provider abstraction (deterministic mock or socket sidecar) for
  embedding text.
"""

from lemurkit.textnorm import NormalizedText, normalize_text, strip_html, tokenize
from lemurkit.lcs import LcsAggregate, LcsResult, aggregate_lcs, bow_vectorize, lcs_score
from lemurkit.losses import (
    LossBatch,
    LossOutput,
    finite_diff_check,
    grouped_mnr_loss,
    l2_normalize_rows,
    mnr_loss,
    similarity_matrix,
)
from lemurkit.vindex import (
    SearchResult,
    TruncationPolicy,
    TruncationStats,
    VectorIndex,
    build_index,
    search,
    truncate_text,
)
from lemurkit.corpus import (
    BoundaryRules,
    CorpusError,
    LegalAct,
    PositiveGroup,
    QueryDocPair,
    SplitManifest,
    assign_splits,
    build_pairs,
    load_corpus,
    split_metadata,
)
from lemurkit.evalkit import EvalConfig, EvalReport, accuracy_from_ranks, compare, evaluate
from lemurkit.embedclient import (
    EmbedRequest,
    EmbedResponse,
    MockProvider,
    ProviderError,
    SocketProvider,
    embed_batch,
    make_provider,
    mock_embed,
)

__version__ = "0.1.0"

__all__ = [
    "NormalizedText",
    "normalize_text",
    "strip_html",
    "tokenize",
    "LcsAggregate",
    "LcsResult",
    "aggregate_lcs",
    "bow_vectorize",
    "lcs_score",
    "LossBatch",
    "LossOutput",
    "finite_diff_check",
    "grouped_mnr_loss",
    "l2_normalize_rows",
    "mnr_loss",
    "similarity_matrix",
    "SearchResult",
    "TruncationPolicy",
    "TruncationStats",
    "VectorIndex",
    "build_index",
    "search",
    "truncate_text",
    "BoundaryRules",
    "CorpusError",
    "LegalAct",
    "PositiveGroup",
    "QueryDocPair",
    "SplitManifest",
    "assign_splits",
    "build_pairs",
    "load_corpus",
    "split_metadata",
    "EvalConfig",
    "EvalReport",
    "accuracy_from_ranks",
    "compare",
    "evaluate",
    "EmbedRequest",
    "EmbedResponse",
    "MockProvider",
    "ProviderError",
    "SocketProvider",
    "embed_batch",
    "make_provider",
    "mock_embed",
]
