"""Tree data model: nodes, structural mutation, statistics and validation.

The root is a structural sentinel with neither content nor embedding. Every
other node carries text content and an embedding of the tree's dimension.
Node ids are integers handed out in creation order and never reused.
"""

import threading
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InvalidArgument, InvalidState, NotFound
from .tokenizers import DEFAULT_TOKENIZER, count_tokens

NodeId = int

ROOT_ID: NodeId = 0


@dataclass
class MemoryNode:
    id: NodeId
    content: Optional[str]
    embedding: Optional[np.ndarray]
    parent: Optional[NodeId]
    children: List[NodeId] = field(default_factory=list)
    depth: int = 0
    # set by expand_leaf; cleared once the node is re-aggregated
    stale: bool = False

    @property
    def is_leaf(self):
        return not self.children


class MemoryTree:
    """A rooted, ordered tree of :class:`MemoryNode` keyed by id.

    Single-writer: mutations take ``self.lock``; readers may traverse freely
    between mutations.
    """

    def __init__(self, embedding_dimension: int):
        if not isinstance(embedding_dimension, (int, np.integer)) or embedding_dimension < 1:
            raise InvalidArgument(f"embedding_dimension must be a positive integer, got {embedding_dimension!r}")
        self.embedding_dimension = int(embedding_dimension)
        self.root = ROOT_ID
        self.nodes = {ROOT_ID: MemoryNode(ROOT_ID, None, None, None, [], 0)}
        self.creation_counter = ROOT_ID + 1
        self.max_depth = 0
        self.lock = threading.RLock()

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, node_id):
        return node_id in self.nodes

    def __getitem__(self, node_id) -> MemoryNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NotFound(f"no node with id {node_id!r}") from None

    def __iter__(self):
        return iter(self.nodes.values())

    def content_nodes(self):
        """All non-root nodes in id order."""
        return [n for n in self.nodes.values() if n.id != self.root]

    def leaves(self):
        return [n for n in self.nodes.values() if n.is_leaf and n.id != self.root]

    def path_to(self, node_id):
        """Ids from the root down to ``node_id`` inclusive."""
        path = []
        node = self[node_id]
        while node is not None:
            path.append(node.id)
            node = self.nodes[node.parent] if node.parent is not None else None
        return path[::-1]

    def leaf_descendants(self, node_id):
        out = []
        stack = [node_id]
        while stack:
            nid = stack.pop()
            node = self.nodes[nid]
            if node.children:
                stack.extend(reversed(node.children))
            else:
                out.append(nid)
        return out

    def _check_embedding(self, embedding):
        vec = np.asarray(embedding, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != self.embedding_dimension:
            raise InvalidArgument(
                f"embedding has shape {vec.shape}, tree expects ({self.embedding_dimension},)"
            )
        if not np.all(np.isfinite(vec)):
            raise InvalidArgument("embedding contains non-finite values")
        return vec

    def _new_id(self):
        nid = self.creation_counter
        self.creation_counter += 1
        return nid

    def attach_child(self, parent: NodeId, content: str, embedding) -> NodeId:
        """Append a new node under ``parent`` and return its id."""
        if parent not in self.nodes:
            raise NotFound(f"no parent node with id {parent!r}")
        if not isinstance(content, str) or not content:
            raise InvalidArgument("content must be a non-empty string")
        vec = self._check_embedding(embedding)
        with self.lock:
            p = self.nodes[parent]
            nid = self._new_id()
            self.nodes[nid] = MemoryNode(nid, content, vec, parent, [], p.depth + 1)
            p.children.append(nid)
            self.max_depth = max(self.max_depth, p.depth + 1)
        return nid

    def expand_leaf(self, leaf: NodeId) -> NodeId:
        """Turn a leaf into a parent of a fresh copy of itself.

        The leaf keeps its id and position; its content and embedding are
        marked stale until the caller re-aggregates it. Returns the id of
        the demoted copy.
        """
        node = self[leaf]
        if node.id == self.root:
            raise InvalidState("cannot expand the root")
        if node.children:
            raise InvalidState(f"node {leaf} has children and is not a leaf")
        with self.lock:
            nid = self._new_id()
            self.nodes[nid] = MemoryNode(
                nid, node.content, node.embedding.copy(), leaf, [], node.depth + 1
            )
            node.children.append(nid)
            node.stale = True
            self.max_depth = max(self.max_depth, node.depth + 1)
        return nid

    def set_content(self, node_id: NodeId, content: str, embedding):
        """Replace a non-root node's content and embedding, clearing staleness."""
        node = self[node_id]
        if node.id == self.root:
            raise InvalidState("the root holds no content")
        if not isinstance(content, str) or not content:
            raise InvalidArgument("content must be a non-empty string")
        vec = self._check_embedding(embedding)
        with self.lock:
            node.content = content
            node.embedding = vec
            node.stale = False

    def copy(self):
        other = MemoryTree(self.embedding_dimension)
        other.nodes = {
            nid: MemoryNode(
                n.id,
                n.content,
                None if n.embedding is None else n.embedding.copy(),
                n.parent,
                list(n.children),
                n.depth,
                n.stale,
            )
            for nid, n in self.nodes.items()
        }
        other.root = self.root
        other.creation_counter = self.creation_counter
        other.max_depth = self.max_depth
        return other


def new_tree(embedding_dimension: int) -> MemoryTree:
    return MemoryTree(embedding_dimension)


@dataclass
class DepthTokens:
    depth: int
    count: int
    median: float
    q1: float
    q3: float


@dataclass
class TreeStats:
    n_nodes: int
    n_leaves: int
    n_branching: int
    max_depth: int
    avg_depth: float
    branching_factor: float
    height_to_width: float
    tokens_per_depth: List[DepthTokens]

    def as_dict(self):
        d = dict(self.__dict__)
        d["tokens_per_depth"] = [t.__dict__ for t in self.tokens_per_depth]
        return d


def tree_stats(tree: MemoryTree, tokenizer=None) -> TreeStats:
    """Counts include the root; it is a leaf only while the tree is empty.

    ``avg_depth`` averages over non-root nodes. ``height_to_width`` is
    ``max_depth / branching_factor``.
    """
    tokenizer = tokenizer or DEFAULT_TOKENIZER
    n_nodes = len(tree.nodes)
    n_leaves = sum(1 for n in tree.nodes.values() if n.is_leaf)
    n_branching = n_nodes - n_leaves
    depths = [n.depth for n in tree.nodes.values()]
    max_depth = max(depths)
    non_root = [n for n in tree.nodes.values() if n.id != tree.root]
    avg_depth = float(np.mean([n.depth for n in non_root])) if non_root else 0.0
    branching_factor = (n_nodes - 1) / n_branching if n_branching else 0.0
    height_to_width = max_depth / branching_factor if branching_factor else 0.0

    by_depth = {}
    for n in non_root:
        by_depth.setdefault(n.depth, []).append(count_tokens(tokenizer, n.content or ""))
    tokens_per_depth = []
    for depth in sorted(by_depth):
        q1, med, q3 = np.percentile(by_depth[depth], [25, 50, 75])
        tokens_per_depth.append(
            DepthTokens(depth, len(by_depth[depth]), float(med), float(q1), float(q3))
        )
    return TreeStats(
        n_nodes, n_leaves, n_branching, max_depth, avg_depth,
        branching_factor, height_to_width, tokens_per_depth,
    )


@dataclass(frozen=True)
class Violation:
    node: NodeId
    rule: str
    detail: str

    def __str__(self):
        return f"node {self.node}: {self.rule}: {self.detail}"


def validate(tree: MemoryTree) -> List[Violation]:
    """Check every structural invariant; an empty list means the tree is sound."""
    out = []
    nodes = tree.nodes
    dim = tree.embedding_dimension

    if tree.root not in nodes:
        return [Violation(tree.root, "root-missing", "root id not present")]
    root = nodes[tree.root]
    if root.content is not None or root.embedding is not None:
        out.append(Violation(root.id, "root-sentinel", "root must hold neither content nor embedding"))
    if root.parent is not None:
        out.append(Violation(root.id, "root-parent", "root must not have a parent"))
    if root.depth != 0:
        out.append(Violation(root.id, "depth", f"root depth is {root.depth}, expected 0"))

    for nid, node in nodes.items():
        if node.id != nid:
            out.append(Violation(nid, "id", f"registered under {nid} but carries id {node.id}"))
        if nid >= tree.creation_counter:
            out.append(Violation(nid, "id", f"id not below creation counter {tree.creation_counter}"))
        if nid == tree.root:
            pass
        else:
            if not node.content:
                out.append(Violation(nid, "content", "non-root node without content"))
            if node.embedding is None:
                out.append(Violation(nid, "embedding", "non-root node without embedding"))
            else:
                emb = np.asarray(node.embedding)
                if emb.shape != (dim,):
                    out.append(Violation(nid, "dimension", f"embedding shape {emb.shape}, expected ({dim},)"))
                elif not np.all(np.isfinite(emb)):
                    out.append(Violation(nid, "finite", "embedding has non-finite entries"))
            if node.parent is None or node.parent not in nodes:
                out.append(Violation(nid, "parent-link", f"parent {node.parent!r} does not exist"))
            else:
                parent = nodes[node.parent]
                if nid not in parent.children:
                    out.append(Violation(nid, "parent-link", f"not listed among children of {node.parent}"))
                if node.depth != parent.depth + 1:
                    out.append(Violation(
                        nid, "depth", f"depth {node.depth} but parent depth is {parent.depth}"
                    ))
        if node.stale:
            out.append(Violation(nid, "stale", "stale parent content pending aggregation"))
        for c in node.children:
            if c not in nodes:
                out.append(Violation(nid, "child-link", f"child {c} does not exist"))
            elif nodes[c].parent != nid:
                out.append(Violation(nid, "child-link", f"child {c} names {nodes[c].parent} as parent"))
        if len(set(node.children)) != len(node.children):
            out.append(Violation(nid, "child-link", "duplicate child ids"))

    seen = set()
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            out.append(Violation(nid, "acyclic", "reached more than once from the root"))
            continue
        seen.add(nid)
        stack.extend(c for c in nodes[nid].children if c in nodes)
    for nid in nodes:
        if nid not in seen:
            out.append(Violation(nid, "reachable", "not reachable from the root"))
    return out
