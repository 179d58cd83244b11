"""Acceptance criteria, one test each, at the stated tolerances."""

import json
import math
import time

import numpy as np
import pytest

from memtree import MemTree
from memtree.aggregation import render_aggregate_prompt
from memtree.embedding import LookupEmbedder
from memtree.evaluation import brute_force_optimal, evaluate_instances, moseley_wang_revenue
from memtree.insertion import ThresholdPolicy, batch_insert, threshold
from memtree.persist import load_snapshot, save_snapshot
from memtree.retrieval import RetrievalQuery, collapsed_retrieve, render_answer_prompt, traversal_retrieve
from memtree.tree import validate

from conftest import GOLDEN, cli_pipeline, criterion, random_tree, run_cli
from test_persist import small_memory
from test_retrieval import _results, oracle, two_branch_tree

LAM = 0.5
BETA = math.exp(-LAM)
N_INSTANCES = 150


@pytest.fixture(scope="module")
def harness_run():
    start = time.perf_counter()
    policy = ThresholdPolicy(0.4, LAM, "main-text")
    reports = [r for _, r in evaluate_instances(N_INSTANCES, 7, BETA, seed=2024, policy=policy)]
    return reports, time.perf_counter() - start


def clustered_corpus(rng, n_items, n_topics=40):
    vocab = [a + b for a in "bcdfghklmnprstvz" for b in ("ar", "en", "ol", "ux", "ie", "at")]
    topics = [rng.choice(vocab, 12, replace=False) for _ in range(n_topics)]
    return [" ".join(rng.choice(topics[rng.integers(n_topics)], 8)) for _ in range(n_items)]


def test_criterion_01_otd_bound(harness_run):
    reports, elapsed = harness_run
    with criterion(1, "OTD reaches beta/3 of the optimum on separated instances") as c:
        separated = [r for r in reports if r.otd_separated]
        violations = [r for r in separated if not r.otd_revenue >= BETA / 3 * r.optimal_revenue]
        c.note(f"{len(separated)}/{len(reports)} separated, {len(violations)} violations, {elapsed:.1f}s")
        assert len(separated) >= 100
        assert violations == []
        assert elapsed < 60


def test_criterion_02_memtree_bound(harness_run):
    reports, elapsed = harness_run
    with criterion(2, "mean-embedding tree reaches beta/3 of the optimum on separated instances") as c:
        separated = [r for r in reports if r.memtree_separated]
        violations = [r for r in separated if not r.memtree_revenue >= BETA / 3 * r.optimal_revenue]
        c.note(f"{len(separated)}/{len(reports)} separated, {len(violations)} violations, {elapsed:.1f}s")
        assert len(separated) >= 100
        assert elapsed < 120
        assert violations == [], (
            f"{len(violations)} bound violations, e.g. n={violations[0].n} "
            f"rev={violations[0].memtree_revenue:.4g} < {violations[0].bound:.4g}"
        )


def test_criterion_03_threshold():
    with criterion(3, "normalized threshold value and strict monotonicity in depth") as c:
        policy = ThresholdPolicy(0.4, 0.5, "normalized")
        for max_depth in (1, 3, 12):
            assert abs(threshold(policy, max_depth, max_depth) - 0.4 * math.exp(0.5)) <= 1e-9
        rng = np.random.default_rng(3)
        for _ in range(1000):
            p = ThresholdPolicy(rng.uniform(0.01, 1.0), rng.uniform(0.01, 2.0),
                                ["main-text", "normalized"][rng.integers(2)])
            max_depth = int(rng.integers(1, 30))
            d = int(rng.integers(0, max_depth))
            assert threshold(p, d + 1, max_depth) > threshold(p, d, max_depth)
        c.note("1000 draws")


def test_criterion_04_collapsed_oracle():
    with criterion(4, "collapsed retrieval equals the score-all oracle") as c:
        rng = np.random.default_rng(4)
        start = time.perf_counter()
        for _ in range(500):
            n = int(rng.integers(1, 201))
            tree = random_tree(rng, n)
            vec = rng.standard_normal(4)
            k = int(rng.integers(1, n + 2))
            theta = float(rng.uniform(-1, 1))
            got = collapsed_retrieve(tree, RetrievalQuery("q", k, theta), LookupEmbedder({"q": vec}))
            assert [(r.node_id, r.similarity) for r in got.ranked] == oracle(tree, vec, k, theta)
        elapsed = time.perf_counter() - start
        c.note(f"500 trees, {elapsed:.1f}s")
        assert elapsed < 30


def test_criterion_05_traversal_vs_collapsed():
    with criterion(5, "traversal equals collapsed at saturating k; k=1 misses the best leaf") as c:
        rng = np.random.default_rng(5)
        for _ in range(100):
            tree = random_tree(rng, int(rng.integers(1, 120)))
            depths = [n.depth for n in tree.nodes.values()]
            k = int(np.bincount(depths).max())
            q = RetrievalQuery("q", k, -1.0)
            emb = LookupEmbedder({"q": rng.standard_normal(4)})
            assert set(traversal_retrieve(tree, q, emb).node_ids) == set(collapsed_retrieve(tree, q, emb).node_ids)
        tree, (a, b, a1, b1) = two_branch_tree()
        q = RetrievalQuery("q", 1, -1.0)
        emb = LookupEmbedder({"q": [1, 0, 0, 0]})
        assert collapsed_retrieve(tree, q, emb).node_ids == [b1]
        assert b1 not in traversal_retrieve(tree, q, emb).node_ids
        c.note("100 trees")


def test_criterion_06_call_accounting():
    with criterion(6, "embed calls = aggregate calls + 1 = content-bearing path length + 1") as c:
        rng = np.random.default_rng(6)
        mem = MemTree(dimension=64)
        reports = mem.extend(clustered_corpus(rng, 1000))
        for r in reports:
            assert r.embed_calls == r.aggregate_calls + 1
            assert r.aggregate_calls == len(r.path) - 1 == mem.tree.nodes[r.new_node].depth - 1
        mean = float(np.mean([r.aggregate_calls for r in reports]))
        max_depth = mem.tree.max_depth
        c.note(f"mean aggregate calls {mean:.2f}, max depth {max_depth}")
        assert 1 <= mean <= max_depth


def test_criterion_07_structural_invariants():
    with criterion(7, "10,000 insertions keep every invariant") as c:
        rng = np.random.default_rng(7)
        items = clustered_corpus(rng, 10_000)
        mem = MemTree(dimension=64)
        start = time.perf_counter()
        mem.extend(items)
        elapsed = time.perf_counter() - start
        c.note(f"{len(mem.tree)} nodes, depth {mem.tree.max_depth}, {elapsed:.1f}s")
        assert validate(mem.tree) == []
        assert len(mem.tree.leaves()) == 10_000
        assert len(mem.tree) <= 2 * 10_000 + 1
        assert elapsed < 60


def test_criterion_08_revenue_units():
    with criterion(8, "revenue unit values") as c:
        assert moseley_wang_revenue((0, 1), [[0, 0.5], [0.5, 0]]) == 0
        assert brute_force_optimal([[0, 0.5], [0.5, 0]])[1] == 0
        w = [[0, 0.9, 0.1], [0.9, 0, 0.2], [0.1, 0.2, 0]]
        assert moseley_wang_revenue(((0, 1), 2), w) == 0.9
        assert moseley_wang_revenue(((0, 2), 1), w) == 0.1
        h, rev = brute_force_optimal(w)
        assert rev == 0.9 and sorted(map(str, h)) == ["(0, 1)", "2"]
        c.note("n=2 -> 0, n=3 -> 0.9 / 0.1")


def test_criterion_09_determinism_and_persistence(tmp_path):
    with criterion(9, "deterministic replay, canonical snapshots, byte-exact goldens") as c:
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        _, _, snap_a = cli_pipeline(tmp_path / "a")
        _, _, snap_b = cli_pipeline(tmp_path / "b")
        data = snap_a.read_bytes()
        assert data == snap_b.read_bytes()
        assert save_snapshot(load_snapshot(data), ThresholdPolicy()) == data
        assert small_memory().to_dot() == (GOLDEN / "tree.dot").read_text(encoding="utf-8")
        agg = render_aggregate_prompt(
            "Alice enjoys hiking in the Alps and owns two dogs.", "Alice adopted a third dog named Biscuit.", 3)
        assert agg.encode("utf-8") == (GOLDEN / "aggregate_prompt.txt").read_bytes()
        res = _results("Alice adopted a third dog named Biscuit.", "Alice enjoys hiking in the Alps.",
                       "Bob moved to Paris last spring.")
        ans = render_answer_prompt("What is the name of Alice's newest dog?", res, 8192)
        assert ans.text.encode("utf-8") == (GOLDEN / "answer_prompt.txt").read_bytes()
        c.note(f"snapshot {len(data)} bytes")


def test_criterion_10_cli_end_to_end(tmp_path, capsys):
    with criterion(10, "CLI init -> ingest -> query golden ranking and exit codes") as c:
        codes, ids, snap = cli_pipeline(tmp_path)
        assert codes == [0, 0, 0]
        assert ids == json.loads((GOLDEN / "cli_query_ids.json").read_text())
        assert run_cli("query", tmp_path / "missing.memtree.json", "q")[0] == 3
        assert run_cli("frobnicate")[0] == 1
        (tmp_path / "bad.json").write_text("{")
        assert run_cli("stats", tmp_path / "bad.json")[0] == 3
        c.note(f"ranking {ids}")
