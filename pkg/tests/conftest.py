import math

import numpy as np
import pytest

from memtree.embedding import LookupEmbedder
from memtree.tree import MemoryTree

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"
GOLDEN = __import__("pathlib").Path(__file__).parent / "golden"


def unit(*xs):
    v = np.asarray(xs, dtype=float)
    return v / np.linalg.norm(v)


def at_cosine(c, dim=4):
    """Unit vector whose cosine with e_0 is exactly ``c`` (up to rounding)."""
    v = np.zeros(dim)
    v[0] = c
    v[1] = math.sqrt(1 - c * c)
    return v


def random_tree(rng, n_nodes, dim=4, palette=None):
    """Random tree built with attach_child; embeddings drawn from a small
    palette so exact similarity ties occur."""
    if palette is None:
        palette = rng.standard_normal((6, dim))
    tree = MemoryTree(dim)
    ids = [tree.root]
    for i in range(n_nodes - 1):
        parent = ids[int(rng.integers(0, len(ids)))]
        emb = palette[int(rng.integers(0, len(palette)))]
        ids.append(tree.attach_child(parent, f"node {i}", emb))
    return tree


class CountingEmbedder:
    def __init__(self, inner):
        self.inner = inner
        self.dimension = inner.dimension
        self.calls = 0

    def embed(self, text):
        self.calls += 1
        return self.inner.embed(text)


class CountingSummarizer:
    def __init__(self, inner):
        self.inner = inner
        self.mean_embedding = getattr(inner, "mean_embedding", False)
        self.calls = []

    def aggregate(self, existing, new, n):
        self.calls.append((existing, new, n))
        return self.inner.aggregate(existing, new, n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def lookup():
    return LookupEmbedder


QUERY_QUESTION = "Which team lifted the league trophy after the goalkeeper saved a penalty?"


def run_cli(*argv):
    """Run the CLI in-process; returns (exit code, stdout text)."""
    import io
    from memtree.cli import main
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def cli_pipeline(workdir):
    """init -> ingest the 50-chunk corpus -> query; returns (codes, ranked ids, snapshot)."""
    import json
    snap = workdir / "fixture.memtree.json"
    codes = [run_cli("init", snap)[0]]
    code, text = run_cli("ingest", snap, FIXTURES / "corpus.jsonl", "--chunk-tokens", 40)
    codes.append(code)
    assert json.loads(text)["inserted"] == 50
    code, text = run_cli("query", snap, QUERY_QUESTION, "--k", 5)
    codes.append(code)
    ids = [json.loads(line)["node_id"] for line in text.splitlines()]
    return codes, ids, snap


# acceptance criterion number -> (status, title, detail)
ACCEPTANCE = {}


class criterion:
    """Record and print the outcome of one acceptance criterion."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.details = []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        detail = "; ".join(self.details)
        if exc_type is None:
            status = "PASS"
        else:
            status = "FAIL"
            first = str(exc).strip().splitlines()[0] if str(exc).strip() else exc_type.__name__
            detail = f"{detail}; {first}" if detail else first
        ACCEPTANCE[self.number] = (status, self.title, detail)
        print(format_criterion(self.number))
        return False


def format_criterion(number):
    status, title, detail = ACCEPTANCE[number]
    return f"criterion {number:2d} {status}: {title}" + (f" ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(format_criterion(number))
