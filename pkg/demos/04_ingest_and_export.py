"""Chunk a JSONL corpus, insert every chunk, save a snapshot, render DOT.

Render the output with Graphviz: dot -Tsvg memtree.dot -o memtree.svg
"""
import sys
from pathlib import Path

from memtree import MemTree
from memtree.ingest import ingest_jsonl, records_to_chunks

here = Path(__file__).resolve().parent
corpus = here.parent / "tests" / "fixtures" / "corpus.jsonl"
out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path.cwd()

with open(corpus, encoding="utf-8") as fh:
    result = ingest_jsonl(fh)
chunks = records_to_chunks(result.records, 40)
print(f"{len(result.records)} records -> {len(chunks)} chunks")

mem = MemTree(dimension=64)
mem.extend(c.text for c in chunks)
print(mem.stats().as_dict())

mem.save(out_dir / "corpus.memtree.json")
(out_dir / "memtree.dot").write_text(mem.to_dot(max_label_chars=30, depth_limit=3))

# a snapshot reloads to the same tree
again = MemTree.load(out_dir / "corpus.memtree.json")
hit = again.retrieve("penalty save in the final minute", k=1).ranked[0]
print(f"{len(again)} nodes reloaded; best hit node {hit.node_id} at depth {hit.depth} ({hit.similarity:.3f})")
