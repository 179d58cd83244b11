"""Collapsed vs traversal retrieval, and the answer prompt built from hits."""
from memtree import MemTree

notes = [
    "Tomatoes need six hours of direct sun every day.",
    "Water tomato plants at the base, never on the leaves.",
    "Basil grows well next to tomatoes in the same bed.",
    "The quarterly report is due to finance on Friday.",
    "Finance wants the report as a spreadsheet, not a PDF.",
    "Book a meeting room for the Friday report review.",
]

mem = MemTree(dimension=128)
mem.extend(notes)

question = "How should I water my tomato plants?"
for mode in ("collapsed", "traversal"):
    result = mem.retrieve(question, k=3, mode=mode)
    print(mode)
    for hit in result.ranked:
        print(f"  {hit.similarity:+.3f} d={hit.depth} {hit.content[:60]}")

# whole nodes are packed into the prompt until the token budget runs out
prompt = mem.answer_prompt(question, k=3, token_budget=40)
print(f"\nincluded nodes {prompt.included}, truncated={prompt.truncated}")
print(prompt.text)
