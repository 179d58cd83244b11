"""Query-time retrieval over a memory tree.

Collapsed retrieval scores every content node as one flat set. Traversal
retrieval walks level by level keeping the top ``k`` of each frontier; it is
kept for comparison and can miss good nodes under a weaker branch.
"""

import heapq
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .embedding import cosine_similarity
from .errors import InvalidArgument
from .tokenizers import DEFAULT_TOKENIZER, count_tokens
from .tree import MemoryTree, NodeId

# (k, token budget) per workload
DIALOGUE_DEFAULTS = (3, 1000)
DOCUMENT_DEFAULTS = (10, 8192)


@dataclass(frozen=True)
class RetrievalQuery:
    text: str
    k: int = 10
    theta_retrieve: float = 0.0
    mode: str = "collapsed"

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgument("k must be >= 1")
        if not -1.0 <= self.theta_retrieve <= 1.0:
            raise InvalidArgument("theta_retrieve must lie in [-1, 1]")
        if self.mode not in ("collapsed", "traversal"):
            raise InvalidArgument(f"unknown retrieval mode {self.mode!r}")


@dataclass
class RetrievedNode:
    node_id: NodeId
    similarity: float
    depth: int
    content: str

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class RetrievalResult:
    ranked: List[RetrievedNode]
    query_embedding: np.ndarray

    @property
    def node_ids(self):
        return [r.node_id for r in self.ranked]


def _score(tree, node_ids, q):
    return {nid: cosine_similarity(q, tree.nodes[nid].embedding) for nid in node_ids}


def _top(scores, k, theta=None):
    items = ((s, nid) for nid, s in scores.items() if theta is None or s >= theta)
    return heapq.nsmallest(k, items, key=lambda t: (-t[0], t[1]))


def _result(tree, picked, q):
    ranked = [RetrievedNode(nid, s, tree.nodes[nid].depth, tree.nodes[nid].content) for s, nid in picked]
    return RetrievalResult(ranked, q)


def collapsed_retrieve(tree: MemoryTree, query: RetrievalQuery, embedder) -> RetrievalResult:
    q = np.asarray(embedder.embed(query.text), dtype=np.float64)
    scores = _score(tree, [n.id for n in tree.content_nodes()], q)
    return _result(tree, _top(scores, query.k, query.theta_retrieve), q)


def traversal_retrieve(tree: MemoryTree, query: RetrievalQuery, embedder) -> RetrievalResult:
    q = np.asarray(embedder.embed(query.text), dtype=np.float64)
    pool = {}
    frontier = list(tree.nodes[tree.root].children)
    while frontier:
        scores = _score(tree, frontier, q)
        kept = [nid for _, nid in _top(scores, query.k)]
        for nid in kept:
            pool[nid] = scores[nid]
        frontier = [c for nid in kept for c in tree.nodes[nid].children]
    return _result(tree, _top(pool, query.k, query.theta_retrieve), q)


def retrieve(tree, query: RetrievalQuery, embedder) -> RetrievalResult:
    if query.mode == "traversal":
        return traversal_retrieve(tree, query, embedder)
    return collapsed_retrieve(tree, query, embedder)


ANSWER_TEMPLATE = """\
Write a high-quality short answer for the given question using only the provided search results (some of which might be irrelevant).

[ Question ]
{query}

[ Search Results ]
{retrieved_content}

[ Output ]
"""


@dataclass
class AnswerPrompt:
    text: str
    included: List[NodeId] = field(default_factory=list)
    # True when some retrieved node did not fit the budget
    truncated: bool = False

    def __str__(self):
        return self.text


def render_answer_prompt(query_text: str, results: RetrievalResult, token_budget: int,
                         tokenizer=None, separator="\n\n") -> AnswerPrompt:
    """Fill the answer template with whole retrieved nodes, best first, until
    the next node would exceed ``token_budget``."""
    tokenizer = tokenizer or DEFAULT_TOKENIZER
    used = 0
    parts, included = [], []
    truncated = False
    for r in results.ranked:
        n = count_tokens(tokenizer, r.content)
        if used + n > token_budget:
            truncated = True
            break
        used += n
        parts.append(r.content)
        included.append(r.node_id)
    text = ANSWER_TEMPLATE.format(query=query_text, retrieved_content=separator.join(parts))
    return AnswerPrompt(text, included, truncated)


def answer(chat, query_text: str, results: RetrievalResult, token_budget: int, tokenizer=None) -> str:
    """Send the rendered answer prompt to a chat client (see ``aggregation.ChatClient``)."""
    return chat.complete(render_answer_prompt(query_text, results, token_budget, tokenizer).text)
