"""Pluggable tokenizers used for chunking, token statistics and prompt budgets.

Anything with ``tokenize(text) -> list`` and ``detokenize(tokens) -> str`` works;
a model tokenizer can be wrapped in a few lines.
"""


class WhitespaceTokenizer:
    """Splits on runs of whitespace and rejoins with single spaces."""

    def tokenize(self, text):
        return text.split()

    def detokenize(self, tokens):
        return " ".join(tokens)

    def count(self, text):
        return len(text.split())


def count_tokens(tokenizer, text):
    count = getattr(tokenizer, "count", None)
    if count is not None:
        return count(text)
    return len(tokenizer.tokenize(text))


DEFAULT_TOKENIZER = WhitespaceTokenizer()
