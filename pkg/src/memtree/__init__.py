"""Online tree-structured memory over text with embedding retrieval.

Items are inserted top-down by embedding similarity against a depth-adaptive
threshold; parents along the insertion path keep running summaries. Queries
are answered by cosine similarity over all nodes. :mod:`memtree.evaluation`
checks the resulting hierarchies against the Moseley-Wang objective.
"""

from .aggregation import (
    MeanEmbeddingSummarizer,
    MockSummarizer,
    RemoteChatSummarizer,
    SummarizerConfig,
    make_summarizer,
    mean_embedding_merge,
    render_aggregate_prompt,
)
from .embedding import (
    EmbeddingProviderConfig,
    MockEmbedder,
    RemoteEmbedder,
    cosine_similarity,
    make_embedder,
    mock_embed,
)
from .errors import MemTreeError
from .ingest import chunk_text, ingest_jsonl
from .insertion import (
    InsertReport,
    ThresholdPolicy,
    batch_insert,
    beta_from_lambda,
    find_insertion_point,
    insert,
    threshold,
)
from .memory import MemTree
from .persist import export_dot, load_snapshot, read_snapshot, save_snapshot
from .retrieval import (
    RetrievalQuery,
    RetrievalResult,
    collapsed_retrieve,
    render_answer_prompt,
    retrieve,
    traversal_retrieve,
)
from .tree import MemoryNode, MemoryTree, TreeStats, new_tree, tree_stats, validate

__version__ = "0.1.0"
