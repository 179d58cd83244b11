"""Versioned JSON snapshots and Graphviz DOT export.

Snapshots are canonical: sorted keys, no insignificant whitespace and
shortest round-trip float text, so ``save(load(b)) == b`` byte for byte.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import CorruptSnapshot, UnsupportedVersion
from .insertion import ThresholdPolicy
from .tree import MemoryNode, MemoryTree, validate

FORMAT_VERSION = 1
SNAPSHOT_SUFFIX = ".memtree.json"


@dataclass
class Snapshot:
    tree: MemoryTree
    policy: ThresholdPolicy


def save_snapshot(tree: MemoryTree, policy: ThresholdPolicy = None) -> bytes:
    policy = policy or ThresholdPolicy()
    nodes = []
    for nid in sorted(tree.nodes):
        n = tree.nodes[nid]
        nodes.append({
            "id": n.id,
            "content": n.content,
            "embedding": None if n.embedding is None else [float(x) for x in n.embedding],
            "parent": n.parent,
            "children": list(n.children),
            "depth": n.depth,
            "stale": n.stale,
        })
    doc = {
        "format_version": FORMAT_VERSION,
        "embedding_dimension": tree.embedding_dimension,
        "policy": policy.as_dict(),
        "root": tree.root,
        "creation_counter": tree.creation_counter,
        "nodes": nodes,
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)
    return text.encode("utf-8") + b"\n"


def read_snapshot(data: bytes) -> Snapshot:
    try:
        doc = json.loads(data)
    except ValueError as exc:
        raise CorruptSnapshot(f"snapshot is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptSnapshot("snapshot is not a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"snapshot format_version {version!r}; this build reads {FORMAT_VERSION}")
    try:
        tree = MemoryTree(int(doc["embedding_dimension"]))
        p = doc["policy"]
        policy = ThresholdPolicy(float(p["theta0"]), float(p["lambda"]), p["mode"])
        tree.root = int(doc["root"])
        tree.creation_counter = int(doc["creation_counter"])
        tree.nodes = {}
        for rec in doc["nodes"]:
            emb = rec["embedding"]
            node = MemoryNode(
                int(rec["id"]),
                rec["content"],
                None if emb is None else np.asarray(emb, dtype=np.float64),
                rec["parent"],
                [int(c) for c in rec["children"]],
                int(rec["depth"]),
                bool(rec.get("stale", False)),
            )
            if node.id in tree.nodes:
                raise CorruptSnapshot(f"node {node.id}: duplicate id")
            tree.nodes[node.id] = node
    except CorruptSnapshot:
        raise
    except Exception as exc:
        raise CorruptSnapshot(f"malformed snapshot: {type(exc).__name__}: {exc}") from exc
    problems = validate(tree)
    if problems:
        raise CorruptSnapshot("; ".join(str(v) for v in problems))
    tree.max_depth = max(n.depth for n in tree.nodes.values())
    return Snapshot(tree, policy)


def load_snapshot(data: bytes) -> MemoryTree:
    return read_snapshot(data).tree


def _dot_escape(s):
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "")


def export_dot(tree: MemoryTree, max_label_chars=40, depth_limit=None, name="memtree") -> str:
    """Render the tree as a DOT digraph, nodes in id order, edges parent -> child."""
    lines = [f"digraph {name} {{", "  node [shape=box];"]
    keep = [n for n in tree.nodes.values() if depth_limit is None or n.depth <= depth_limit]
    for n in sorted(keep, key=lambda n: n.id):
        if n.id == tree.root:
            text = "root"
        else:
            text = n.content if len(n.content) <= max_label_chars else n.content[:max_label_chars] + "..."
        label = _dot_escape(f"{text}\nd={n.depth}")
        lines.append(f'  n{n.id} [label="{label}"];')
    kept = {n.id for n in keep}
    for n in sorted(keep, key=lambda n: n.id):
        for c in n.children:
            if c in kept:
                lines.append(f"  n{n.id} -> n{c};")
    lines.append("}")
    return "\n".join(lines) + "\n"
