"""Grow a memory tree from a short conversation and look at its shape.

Runs offline: the mock embedder hashes character trigrams and the mock
summarizer splices parent and child text instead of calling a model.
"""
from memtree import MemTree

turns = [
    "User: I just adopted a beagle named Pepper.",
    "Assistant: Congratulations! Beagles love long walks.",
    "User: Pepper keeps chewing my running shoes.",
    "User: I'm training for the Berlin marathon in September.",
    "Assistant: For a marathon, build up your long runs slowly.",
    "User: My long run this week was 28 km along the river.",
    "User: Pepper came along for the first 5 km of the run.",
]

mem = MemTree(dimension=128)
for turn in turns:
    report = mem.insert(turn)
    action = "expanded a leaf" if report.expanded else "attached"
    print(f"node {report.new_node:2d} {action:15s} path={report.path} "
          f"aggregate calls={report.aggregate_calls}")

print()
for node in sorted(mem.tree.content_nodes(), key=lambda n: n.id):
    print("  " * node.depth + f"[{node.id}] {node.content[:70]}")

stats = mem.stats()
print(f"\n{stats.n_nodes} nodes, {stats.n_leaves} leaves, max depth {stats.max_depth}")
assert mem.validate() == []
