import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memtree.errors import InvalidArgument, InvalidState, NotFound
from memtree.tree import MemoryTree, new_tree, tree_stats, validate

from conftest import random_tree


def test_new_tree_has_only_root():
    tree = new_tree(8)
    assert len(tree) == 1
    root = tree[tree.root]
    assert root.content is None and root.embedding is None and root.depth == 0
    assert tree.leaves() == []
    assert tree_stats(tree).max_depth == 0


@pytest.mark.parametrize("dim", [0, -3])
def test_new_tree_rejects_bad_dimension(dim):
    with pytest.raises(InvalidArgument):
        new_tree(dim)


def test_attach_child_depth_and_order():
    tree = new_tree(8)
    a = tree.attach_child(tree.root, "a", np.ones(8))
    assert tree[a].depth == 1
    assert tree[tree.root].children == [a]
    b = tree.attach_child(tree.root, "b", np.ones(8))
    assert tree[tree.root].children == [a, b]
    assert b > a


def test_attach_child_errors():
    tree = new_tree(8)
    with pytest.raises(InvalidArgument):
        tree.attach_child(tree.root, "x", np.ones(7))
    with pytest.raises(NotFound):
        tree.attach_child(99, "x", np.ones(8))
    with pytest.raises(InvalidArgument):
        tree.attach_child(tree.root, "", np.ones(8))
    with pytest.raises(InvalidArgument):
        tree.attach_child(tree.root, "x", np.full(8, np.nan))


def test_expand_leaf():
    tree = new_tree(4)
    leaf = tree.attach_child(tree.root, "leaf", [1, 0, 0, 0])
    copy = tree.expand_leaf(leaf)
    assert tree[copy].depth == 2
    assert tree[copy].content == "leaf"
    np.testing.assert_array_equal(tree[copy].embedding, [1, 0, 0, 0])
    assert tree[leaf].children == [copy]
    assert tree[tree.root].children == [leaf]
    # the expanded node waits for re-aggregation
    problems = validate(tree)
    assert [p.rule for p in problems] == ["stale"]
    assert problems[0].node == leaf
    tree.set_content(leaf, "merged", [0, 1, 0, 0])
    assert validate(tree) == []


def test_expand_leaf_rejects_internal_and_root():
    tree = new_tree(4)
    p = tree.attach_child(tree.root, "p", [1, 0, 0, 0])
    tree.attach_child(p, "c1", [1, 0, 0, 0])
    tree.attach_child(p, "c2", [1, 0, 0, 0])
    with pytest.raises(InvalidState):
        tree.expand_leaf(p)
    with pytest.raises(InvalidState):
        tree.expand_leaf(tree.root)


def test_stats_fresh_tree():
    s = tree_stats(new_tree(8))
    assert (s.n_nodes, s.n_leaves, s.n_branching, s.max_depth) == (1, 1, 0, 0)


def test_stats_root_with_two_leaves():
    tree = new_tree(4)
    tree.attach_child(tree.root, "one two", [1, 0, 0, 0])
    tree.attach_child(tree.root, "three", [0, 1, 0, 0])
    s = tree_stats(tree)
    assert (s.n_nodes, s.n_leaves, s.n_branching) == (3, 2, 1)
    assert s.branching_factor == 2.0
    assert s.height_to_width == 0.5
    assert s.avg_depth == 1.0
    assert len(s.tokens_per_depth) == 1
    assert s.tokens_per_depth[0].median == 1.5


def test_stats_table_shaped_tree():
    # 1458 branching nodes (root included) and 1706 leaves: a spine of
    # branching nodes, one leaf hanging off each, the rest under the last
    tree = new_tree(4)
    e = [1, 0, 0, 0]
    spine = [tree.root]
    for _ in range(1457):
        spine.append(tree.attach_child(spine[-1], "s", e))
    for node in spine[:-1]:
        tree.attach_child(node, "l", e)
    for _ in range(1706 - 1457):
        tree.attach_child(spine[-1], "l", e)
    s = tree_stats(tree)
    assert (s.n_nodes, s.n_leaves, s.n_branching) == (3164, 1706, 1458)
    assert s.branching_factor == pytest.approx(3163 / 1458)
    assert round(s.branching_factor, 1) == 2.2


def test_stats_custom_tokenizer():
    class Chars:
        def tokenize(self, text):
            return list(text)

        def detokenize(self, toks):
            return "".join(toks)

    tree = new_tree(4)
    tree.attach_child(tree.root, "abcd", [1, 0, 0, 0])
    assert tree_stats(tree, Chars()).tokens_per_depth[0].median == 4.0


def test_validate_detects_faults():
    tree = new_tree(4)
    a = tree.attach_child(tree.root, "a", [1, 0, 0, 0])
    assert validate(tree) == []
    tree[a].depth = 5
    assert [v.rule for v in validate(tree)] == ["depth"]
    tree[a].depth = 1
    tree[tree.root].content = "oops"
    assert [v.rule for v in validate(tree)] == ["root-sentinel"]


def test_validate_detects_broken_links_and_cycles():
    tree = new_tree(4)
    a = tree.attach_child(tree.root, "a", [1, 0, 0, 0])
    b = tree.attach_child(a, "b", [1, 0, 0, 0])
    tree[b].parent = tree.root
    rules = {v.rule for v in validate(tree)}
    assert "parent-link" in rules and "child-link" in rules

    tree = new_tree(4)
    a = tree.attach_child(tree.root, "a", [1, 0, 0, 0])
    b = tree.attach_child(a, "b", [1, 0, 0, 0])
    tree[tree.root].children = []
    tree[a].parent = b
    tree[b].children.append(a)
    rules = {v.rule for v in validate(tree)}
    assert "reachable" in rules


def test_validate_dimension_and_missing_embedding():
    tree = new_tree(4)
    a = tree.attach_child(tree.root, "a", [1, 0, 0, 0])
    tree[a].embedding = np.ones(3)
    assert [v.rule for v in validate(tree)] == ["dimension"]
    tree[a].embedding = None
    assert [v.rule for v in validate(tree)] == ["embedding"]


def test_copy_is_independent():
    tree = new_tree(4)
    a = tree.attach_child(tree.root, "a", [1, 0, 0, 0])
    other = tree.copy()
    other.attach_child(a, "b", [0, 1, 0, 0])
    assert len(tree) == 2 and len(other) == 3
    assert tree[a].children == []


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_random_attach_sequences_stay_valid(n, seed):
    tree = random_tree(np.random.default_rng(seed), n)
    assert validate(tree) == []
    ids = sorted(tree.nodes)
    assert ids == list(range(len(ids)))
    s = tree_stats(tree)
    assert s.n_nodes == s.n_leaves + s.n_branching
    if s.n_branching:
        assert s.branching_factor == (s.n_nodes - 1) / s.n_branching
