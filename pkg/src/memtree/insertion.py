"""Online insertion: depth-adaptive threshold, top-down traversal, leaf
expansion and ancestor re-aggregation.

Every insertion follows one root-to-node path. At each node the new
embedding is compared to the children; the best child is followed while its
similarity clears ``threshold(depth)``. Reaching a leaf that way expands it
into a parent of its own copy and the new item. Afterwards every
content-bearing node on the path merges the raw new text into its summary
and is re-embedded. Provider calls happen before the tree is touched, so a
failure leaves the tree unchanged.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .aggregation import mean_embedding_merge
from .errors import InvalidArgument, MemTreeError
from .tree import MemoryTree, NodeId

MODES = ("main-text", "normalized")


@dataclass(frozen=True)
class ThresholdPolicy:
    """``main-text``: theta0 * exp(lam * d).
    ``normalized``: theta0 * exp(lam * d / max_depth), max_depth floored at 1.
    """

    theta0: float = 0.4
    lam: float = 0.5
    mode: str = "normalized"

    def __post_init__(self):
        if not 0.0 < self.theta0 <= 1.0:
            raise InvalidArgument(f"theta0 must lie in (0, 1], got {self.theta0}")
        if self.lam < 0.0 or not math.isfinite(self.lam):
            raise InvalidArgument(f"lambda must be a finite nonnegative number, got {self.lam}")
        if self.mode not in MODES:
            raise InvalidArgument(f"threshold mode must be one of {MODES}, got {self.mode!r}")

    def as_dict(self):
        return {"theta0": self.theta0, "lambda": self.lam, "mode": self.mode}


def threshold(policy: ThresholdPolicy, depth: int, max_depth: int = 1) -> float:
    if depth < 0:
        raise InvalidArgument("depth must be nonnegative")
    if policy.mode == "main-text":
        return policy.theta0 * math.exp(policy.lam * depth)
    return policy.theta0 * math.exp(policy.lam * depth / max(max_depth, 1))


def beta_from_lambda(lam: float) -> float:
    """Separation constant implied by an exponential threshold with rate ``lam``."""
    return math.exp(-lam)


@dataclass
class TraceStep:
    node: NodeId
    best_child: Optional[NodeId]
    best_similarity: Optional[float]
    threshold: Optional[float]
    action: str  # "descend" | "attach" | "expand-attach"


@dataclass
class InsertionPoint:
    parent: NodeId
    expanded: bool
    trace: List[TraceStep]


@dataclass
class InsertReport:
    new_node: NodeId
    path: List[NodeId]
    decision_trace: List[TraceStep]
    embed_calls: int
    aggregate_calls: int
    expanded: bool = False
    # id of the copy created when a leaf was expanded; the expanded leaf's
    # original item now lives there
    demoted_node: Optional[NodeId] = None

    def as_dict(self):
        return asdict(self)


def _child_similarities(tree, children, q):
    mat = np.stack([tree.nodes[c].embedding for c in children])
    norms = np.sqrt(np.einsum("ij,ij->i", mat, mat))
    return (mat @ q) / (norms * np.sqrt(np.dot(q, q)))


def find_insertion_point(tree: MemoryTree, new_embedding, policy: ThresholdPolicy) -> InsertionPoint:
    """Walk down from the root; read-only."""
    q = tree._check_embedding(new_embedding)
    if not np.any(q):
        raise InvalidArgument("cannot insert a zero embedding")
    max_depth = max(tree.max_depth, 1)
    trace = []
    node = tree.nodes[tree.root]
    while True:
        if node.id != tree.root and not node.children:
            trace.append(TraceStep(node.id, None, None, None, "expand-attach"))
            return InsertionPoint(node.id, True, trace)
        theta = threshold(policy, node.depth, max_depth)
        if not node.children:
            trace.append(TraceStep(node.id, None, None, theta, "attach"))
            return InsertionPoint(node.id, False, trace)
        sims = _child_similarities(tree, node.children, q)
        best = int(np.argmax(sims))
        best_id, s_max = node.children[best], float(sims[best])
        if s_max >= theta:
            trace.append(TraceStep(node.id, best_id, s_max, theta, "descend"))
            node = tree.nodes[best_id]
        else:
            trace.append(TraceStep(node.id, best_id, s_max, theta, "attach"))
            return InsertionPoint(node.id, False, trace)


def insert(tree: MemoryTree, content: str, embedder, summarizer,
           policy: Optional[ThresholdPolicy] = None, max_workers: int = 1) -> InsertReport:
    """Insert one item. ``max_workers > 1`` runs the per-ancestor
    aggregate-and-embed calls concurrently."""
    if not isinstance(content, str) or not content:
        raise InvalidArgument("content must be a non-empty string")
    policy = policy or ThresholdPolicy()
    with tree.lock:
        e_new = np.asarray(embedder.embed(content), dtype=np.float64)
        point = find_insertion_point(tree, e_new, policy)
        path = tree.path_to(point.parent)
        ancestors = path[1:]

        def n_after(v):
            if v != point.parent:
                return len(tree.nodes[v].children)
            return 2 if point.expanded else len(tree.nodes[v].children) + 1

        def update(v):
            merged = summarizer.aggregate(tree.nodes[v].content, content, n_after(v))
            if getattr(summarizer, "mean_embedding", False):
                leaves = [tree.nodes[u].embedding for u in tree.leaf_descendants(v)]
                emb = mean_embedding_merge(leaves + [e_new])
            else:
                emb = np.asarray(embedder.embed(merged), dtype=np.float64)
            return merged, emb

        if max_workers > 1 and len(ancestors) > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                updates = list(pool.map(update, ancestors))
        else:
            updates = [update(v) for v in ancestors]

        demoted = None
        if point.expanded:
            demoted = tree.expand_leaf(point.parent)
        new_id = tree.attach_child(point.parent, content, e_new)
        for v, (merged, emb) in zip(ancestors, updates):
            tree.set_content(v, merged, emb)

    return InsertReport(
        new_node=new_id,
        path=path,
        decision_trace=point.trace,
        embed_calls=1 + len(ancestors),
        aggregate_calls=len(ancestors),
        expanded=point.expanded,
        demoted_node=demoted,
    )


class BatchInsertError(MemTreeError):
    """Raised by :func:`batch_insert`; ``reports`` holds the completed insertions."""

    def __init__(self, index, cause, reports):
        super().__init__(f"insertion {index} failed: {cause}")
        self.index = index
        self.cause = cause
        self.reports = reports
        self.kind = getattr(cause, "kind", "error")


def batch_insert(tree, contents, embedder, summarizer, policy=None, max_workers=1, progress=None):
    """Insert ``contents`` in order; stops at the first failure."""
    reports = []
    for i, content in enumerate(contents):
        try:
            reports.append(insert(tree, content, embedder, summarizer, policy, max_workers))
        except Exception as exc:
            raise BatchInsertError(i, exc, reports) from exc
        if progress is not None:
            progress(i + 1, len(contents))
    return reports
