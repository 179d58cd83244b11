"""Hierarchical-clustering quality checks for the insertion algorithm.

A hierarchy over ``n`` points is a nested tuple whose leaves are the ints
``0..n-1``; e.g. ``((0, 1), 2)``. Weights are a symmetric nonnegative
``n x n`` array with zero diagonal.

Contents: Moseley-Wang revenue, an exhaustive optimum over binary
hierarchies (plus a subset dynamic program used as a cross-check), the
Online Top-Down (OTD) reference insertion rule, the beta-well-separation
check, and a harness that compares OTD and the memory tree (mean-embedding
mode) against ``beta / 3`` of the optimum.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .aggregation import MeanEmbeddingSummarizer
from .embedding import LookupEmbedder
from .errors import InvalidArgument, TooLarge
from .insertion import ThresholdPolicy, insert
from .tree import MemoryTree

MAX_BRUTE_FORCE_N = 8


def similarity_matrix(w, atol=1e-12) -> np.ndarray:
    """Validate and return ``w`` as a float array."""
    w = np.array(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InvalidArgument(f"similarity matrix must be square, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidArgument("similarity matrix has non-finite entries")
    if np.any(w < 0):
        raise InvalidArgument("similarity weights must be nonnegative")
    if np.any(np.abs(np.diag(w)) > atol):
        raise InvalidArgument("similarity matrix must have a zero diagonal")
    if not np.allclose(w, w.T, rtol=0.0, atol=atol):
        raise InvalidArgument("similarity matrix must be symmetric")
    return w


def weights_from_embeddings(embeddings) -> np.ndarray:
    """``w_ij = max(0, cosine(e_i, e_j))`` with a zero diagonal."""
    e = np.asarray(embeddings, dtype=np.float64)
    e = e / np.linalg.norm(e, axis=1, keepdims=True)
    w = np.clip(e @ e.T, 0.0, None)
    w = (w + w.T) / 2
    np.fill_diagonal(w, 0.0)
    return w


def leaves(h):
    if isinstance(h, (int, np.integer)):
        return (int(h),)
    return tuple(i for c in h for i in leaves(c))


def _check_hierarchy(h, n):
    got = leaves(h)
    if sorted(got) != list(range(n)):
        raise InvalidArgument(f"hierarchy leaves {sorted(got)} do not match 0..{n - 1}")


def moseley_wang_revenue(h, w) -> float:
    """Sum over pairs of ``w_ij * (n - |leaves(lca(i, j))|)``."""
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    _check_hierarchy(h, n)
    total = 0.0

    def walk(node):
        nonlocal total
        if isinstance(node, (int, np.integer)):
            return [int(node)]
        groups = [walk(c) for c in node]
        size = sum(len(g) for g in groups)
        for a, b in itertools.combinations(groups, 2):
            total += float(w[np.ix_(a, b)].sum()) * (n - size)
        return [i for g in groups for i in g]

    walk(h)
    return total


def binary_hierarchies(n):
    """Every rooted binary hierarchy over ``0..n-1``, each exactly once.

    Leaf ``k`` is grafted onto every edge (and above the root) of each
    hierarchy over ``0..k-1``; this fixes the canonical order.
    """
    if n < 1:
        return

    def graft(h, k):
        yield (h, k)
        if isinstance(h, tuple):
            a, b = h
            for a2 in graft(a, k):
                yield (a2, b)
            for b2 in graft(b, k):
                yield (a, b2)

    def build(k):
        if k == 1:
            yield 0
            return
        for h in build(k - 1):
            yield from graft(h, k - 1)

    yield from build(n)


class _BinaryRevenue:
    """Revenue of binary hierarchies with cached subtree terms and pairwise
    cross sums precomputed over leaf bitmasks."""

    def __init__(self, w):
        self.w = w
        self.n = w.shape[0]
        self.cache = {}

    def cross(self, a_mask, b_mask):
        w = self.w
        a = [i for i in range(self.n) if a_mask >> i & 1]
        b = [j for j in range(self.n) if b_mask >> j & 1]
        return float(w[np.ix_(a, b)].sum())

    def __call__(self, h):
        hit = self.cache.get(h)
        if hit is not None:
            return hit
        if isinstance(h, int):
            out = (1 << h, 1, 0.0)
        else:
            ma, sa, ra = self(h[0])
            mb, sb, rb = self(h[1])
            size = sa + sb
            out = (ma | mb, size, ra + rb + (self.n - size) * self.cross(ma, mb))
        self.cache[h] = out
        return out


def brute_force_optimal(w):
    """Exhaustive argmax of the revenue over binary hierarchies (n <= 8).

    Returns ``(hierarchy, revenue)``; ties go to the earliest hierarchy in
    :func:`binary_hierarchies` order.
    """
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    if n > MAX_BRUTE_FORCE_N:
        raise TooLarge(f"brute force is limited to n <= {MAX_BRUTE_FORCE_N}, got {n}")
    if n < 1:
        raise InvalidArgument("need at least one point")
    rev = _BinaryRevenue(w)
    best_h, best = None, -math.inf
    tol = 1e-12 * max(1.0, float(w.sum()) * n)
    for h in binary_hierarchies(n):
        r = rev(h)[2]
        if r > best + tol:
            best_h, best = h, r
    return best_h, moseley_wang_revenue(best_h, w)


def optimal_revenue_dp(w) -> float:
    """Optimal revenue via a dynamic program over leaf subsets (O(3^n))."""
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    full = (1 << n) - 1
    within = np.zeros(1 << n)
    for mask in range(1, 1 << n):
        low = mask & -mask
        i = low.bit_length() - 1
        rest = mask ^ low
        within[mask] = within[rest] + sum(w[i, j] for j in range(n) if rest >> j & 1)
    best = np.zeros(1 << n)
    popcount = [bin(m).count("1") for m in range(1 << n)]
    for mask in sorted(range(1, full + 1), key=lambda m: popcount[m]):
        if popcount[mask] < 2:
            continue
        low = mask & -mask
        rest = mask ^ low
        top = -math.inf
        # enumerate bipartitions with the lowest bit fixed in the first half
        sub = rest
        while True:
            a = sub | low
            b = mask ^ a
            if b:
                cross = within[mask] - within[a] - within[b]
                top = max(top, best[a] + best[b] + (n - popcount[mask]) * cross)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[mask] = top
    return float(best[full])


def avg_within(leaf_ids, w) -> Optional[float]:
    """Mean similarity over unordered pairs inside a cluster; None for singletons."""
    ids = list(leaf_ids)
    if len(ids) < 2:
        return None
    sub = w[np.ix_(ids, ids)]
    return float(sub[np.triu_indices(len(ids), 1)].mean())


def avg_to(leaf_ids, x, w) -> float:
    """Mean similarity between ``x`` and the points of a cluster."""
    return float(w[list(leaf_ids), x].mean())


def otd_insert(h, x, w):
    """Online Top-Down insertion of point ``x`` into hierarchy ``h``.

    At subtree S: if avg(S, x) <= avg(S), make x a sibling of S; otherwise
    recurse into the child most similar to x on average. A single leaf is
    paired with x. ``h=None`` starts a new hierarchy.
    """
    w = np.asarray(w, dtype=np.float64)
    if h is None:
        return x

    def go(s):
        if isinstance(s, (int, np.integer)):
            return (s, x)
        ls = leaves(s)
        if avg_to(ls, x, w) <= avg_within(ls, w):
            return (s, x)
        scores = [avg_to(leaves(c), x, w) for c in s]
        best = int(np.argmax(scores))
        return tuple(go(c) if i == best else c for i, c in enumerate(s))

    return go(h)


@dataclass
class SeparationViolation:
    subtree: tuple
    child: object
    child_cohesion: float
    child_to_x: float
    beta: float

    def __str__(self):
        return (f"subtree {self.subtree}: child {self.child} cohesion {self.child_cohesion:.6g} "
                f"< beta * {self.child_to_x:.6g}")


def _subtrees(h):
    if isinstance(h, tuple):
        yield h
        for c in h:
            yield from _subtrees(c)


def check_beta_separation(h, w, x, beta) -> List[SeparationViolation]:
    """Check the beta-well-separated condition of ``h`` for new point ``x``.

    For every internal subtree S with avg(S, x) > avg(S), and every pair of
    distinct children A, B with avg(A, x) <= avg(B, x), require
    avg(A) >= beta * avg(A, x). Single-point children have no internal
    similarity and are not checked.
    """
    if not 0.0 < beta <= 1.0:
        raise InvalidArgument(f"beta must lie in (0, 1], got {beta}")
    w = np.asarray(w, dtype=np.float64)
    out = []
    if h is None:
        return out
    for s in _subtrees(h):
        ls = leaves(s)
        if not avg_to(ls, x, w) > avg_within(ls, w):
            continue
        to_x = [avg_to(leaves(c), x, w) for c in s]
        for i, a in enumerate(s):
            la = leaves(a)
            if len(la) < 2:
                continue
            if not any(to_x[i] <= to_x[j] for j in range(len(s)) if j != i):
                continue
            cohesion = avg_within(la, w)
            if cohesion < beta * to_x[i]:
                out.append(SeparationViolation(s, a, cohesion, to_x[i], beta))
    return out


def tree_to_hierarchy(tree: MemoryTree, leaf_item):
    """Convert a memory tree to a hierarchy over item indices.

    ``leaf_item`` maps leaf node ids to item indices. Single-child internal
    nodes are collapsed since they do not change any lca.
    """
    def go(nid):
        node = tree.nodes[nid]
        if not node.children:
            return leaf_item[nid]
        kids = [go(c) for c in node.children]
        return kids[0] if len(kids) == 1 else tuple(kids)

    if not tree.nodes[tree.root].children:
        return None
    return go(tree.root)


def memtree_hierarchy(stream, embeddings, policy: ThresholdPolicy, beta=None, w=None):
    """Insert ``stream`` (item indices) into a mean-embedding memory tree.

    Returns ``(hierarchy, tree, violations)``; when ``beta`` is given the
    separation condition is checked against the tree before every insertion.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    embedder = LookupEmbedder({f"item-{i}": embeddings[i] for i in range(len(embeddings))})
    summarizer = MeanEmbeddingSummarizer()
    tree = MemoryTree(embeddings.shape[1])
    leaf_item = {}
    violations = []
    for x in stream:
        if beta is not None:
            violations += check_beta_separation(tree_to_hierarchy(tree, leaf_item), w, x, beta)
        report = insert(tree, f"item-{x}", embedder, summarizer, policy)
        if report.demoted_node is not None:
            leaf_item[report.demoted_node] = leaf_item.pop(report.path[-1])
        leaf_item[report.new_node] = x
    return tree_to_hierarchy(tree, leaf_item), tree, violations


def otd_hierarchy(stream, w, beta=None):
    """Run OTD over ``stream``; returns ``(hierarchy, violations)``."""
    h = None
    violations = []
    for x in stream:
        if beta is not None:
            violations += check_beta_separation(h, w, x, beta)
        h = otd_insert(h, x, w)
    return h, violations



@dataclass
class HarnessReport:
    n: int
    beta: float
    otd_revenue: float
    memtree_revenue: float
    optimal_revenue: float
    otd_violations: List[SeparationViolation] = field(default_factory=list)
    memtree_violations: List[SeparationViolation] = field(default_factory=list)

    @property
    def bound(self):
        return self.beta / 3 * self.optimal_revenue

    @property
    def otd_separated(self):
        return not self.otd_violations

    @property
    def memtree_separated(self):
        return not self.memtree_violations

    @property
    def otd_bound_holds(self):
        return self.otd_revenue >= self.bound

    @property
    def memtree_bound_holds(self):
        return self.memtree_revenue >= self.bound

    @property
    def bound_holds(self):
        """The bound where it applies: only for separated streams."""
        return ((not self.otd_separated or self.otd_bound_holds)
                and (not self.memtree_separated or self.memtree_bound_holds))


def bound_harness(stream, w=None, beta=None, embeddings=None, policy=None) -> HarnessReport:
    """Compare OTD and the memory tree with ``beta / 3`` of the optimum.

    Give either ``embeddings`` (``w`` is then derived as clipped cosines) or
    ``w`` alone, in which case vectors realising it exactly are built from a
    factorisation of ``w + I`` (which must be positive semidefinite).
    ``beta`` defaults to ``exp(-policy.lam)``.
    """
    policy = policy or ThresholdPolicy(theta0=0.4, lam=0.5, mode="main-text")
    if beta is None:
        beta = math.exp(-policy.lam)
    if embeddings is None:
        if w is None:
            raise InvalidArgument("need a similarity matrix or embeddings")
        embeddings = realize_weights(w)
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if w is None:
        w = weights_from_embeddings(embeddings)
    w = similarity_matrix(w)
    n = w.shape[0]
    stream = [int(x) for x in stream]
    if sorted(stream) != list(range(n)):
        raise InvalidArgument("stream must be a permutation of 0..n-1")

    h_otd, v_otd = otd_hierarchy(stream, w, beta)
    h_mem, _, v_mem = memtree_hierarchy(stream, embeddings, policy, beta, w)
    _, opt = brute_force_optimal(w)
    rev_mem = moseley_wang_revenue(h_mem, w) if isinstance(h_mem, tuple) else 0.0
    rev_otd = moseley_wang_revenue(h_otd, w) if isinstance(h_otd, tuple) else 0.0
    return HarnessReport(n, beta, rev_otd, rev_mem, opt, v_otd, v_mem)


def realize_weights(w) -> np.ndarray:
    """Unit vectors whose pairwise cosines equal ``w`` exactly (needs ``w + I`` PSD)."""
    w = similarity_matrix(w)
    gram = w + np.eye(w.shape[0])
    vals, vecs = np.linalg.eigh(gram)
    if vals.min() < -1e-9:
        raise InvalidArgument("w + I is not positive semidefinite; no embedding realises it")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def planted_instance(n, rng, dim=32):
    """Unit vectors with a planted two-level cluster structure, in shuffled order.

    Returns ``(embeddings, stream)``. Top-level cluster directions are random
    (hence nearly orthogonal), each split into sub-clusters with a smaller
    offset, plus per-point noise. Scales are drawn per instance.
    """
    if n < 1:
        raise InvalidArgument("n must be positive")
    k_top = int(rng.integers(1, min(3, n) + 1))
    top_of = _split(n, k_top, rng)
    sub_of = np.empty(n, dtype=int)
    next_sub = 0
    for t in range(k_top):
        members = np.flatnonzero(top_of == t)
        k_sub = int(rng.integers(1, min(2, len(members)) + 1))
        labels = _split(len(members), k_sub, rng)
        sub_of[members] = labels + next_sub
        next_sub += k_sub
    top_dirs = _unit(rng.standard_normal((k_top, dim)))
    sub_dirs = _unit(rng.standard_normal((next_sub, dim)))
    a_sub = rng.uniform(0.3, 0.7)
    a_noise = rng.uniform(0.1, 0.3)
    noise = _unit(rng.standard_normal((n, dim)))
    e = top_dirs[top_of] + a_sub * sub_dirs[sub_of] + a_noise * noise
    return _unit(e), [int(i) for i in rng.permutation(n)]


def _split(n, k, rng):
    """Random labels 0..k-1 for n items, every label used."""
    labels = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
    rng.shuffle(labels)
    return labels


def _unit(m):
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def evaluate_instances(n_instances, n, beta=None, seed=0, policy=None, dim=32):
    """Run the harness on seeded planted instances; yields (index, report)."""
    rng = np.random.default_rng(seed)
    for i in range(n_instances):
        size = int(rng.integers(2, n + 1)) if n > 2 else n
        emb, stream = planted_instance(size, rng, dim)
        yield i, bound_harness(stream, beta=beta, embeddings=emb, policy=policy)
