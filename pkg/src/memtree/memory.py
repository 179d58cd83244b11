"""High-level facade bundling a tree with its providers and policy."""

from pathlib import Path

from .aggregation import MockSummarizer
from .embedding import MockEmbedder
from .insertion import ThresholdPolicy, batch_insert, insert
from .persist import export_dot, read_snapshot, save_snapshot
from .retrieval import RetrievalQuery, render_answer_prompt, retrieve
from .tree import MemoryTree, tree_stats, validate


class MemTree:
    """Tree-structured memory.

    >>> mem = MemTree(dimension=64)
    >>> _ = mem.insert("the cat sat on the mat")
    >>> [r.content for r in mem.retrieve("cat on a mat", k=1).ranked]
    ['the cat sat on the mat']
    """

    def __init__(self, dimension=64, embedder=None, summarizer=None, policy=None, tree=None):
        self.embedder = embedder or MockEmbedder(dimension)
        self.summarizer = summarizer or MockSummarizer()
        self.policy = policy or ThresholdPolicy()
        self.tree = tree or MemoryTree(self.embedder.dimension)
        if self.tree.embedding_dimension != self.embedder.dimension:
            raise ValueError("embedder dimension does not match the tree")

    def insert(self, text, max_workers=1):
        return insert(self.tree, text, self.embedder, self.summarizer, self.policy, max_workers)

    def extend(self, texts, max_workers=1):
        return batch_insert(self.tree, list(texts), self.embedder, self.summarizer, self.policy, max_workers)

    def retrieve(self, text, k=10, theta_retrieve=0.0, mode="collapsed"):
        return retrieve(self.tree, RetrievalQuery(text, k, theta_retrieve, mode), self.embedder)

    def answer_prompt(self, text, k=10, token_budget=8192, **kw):
        return render_answer_prompt(text, self.retrieve(text, k, **kw), token_budget)

    def stats(self):
        return tree_stats(self.tree)

    def validate(self):
        return validate(self.tree)

    def to_dot(self, **kw):
        return export_dot(self.tree, **kw)

    def save(self, path):
        Path(path).write_bytes(save_snapshot(self.tree, self.policy))

    @classmethod
    def load(cls, path, embedder=None, summarizer=None):
        snap = read_snapshot(Path(path).read_bytes())
        embedder = embedder or MockEmbedder(snap.tree.embedding_dimension)
        return cls(embedder=embedder, summarizer=summarizer, policy=snap.policy, tree=snap.tree)

    def __len__(self):
        return len(self.tree)
