"""Merging a node's summary with newly inserted content.

Three backends share the ``aggregate(existing, new, n_children)`` call:
an OpenAI-compatible chat model driven by the merge prompt, a deterministic
truncating mock, and a mean-embedding mode whose node embeddings are the
normalised mean of their leaves (used to check the clustering guarantees).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._http import JsonPoster
from .errors import DegenerateEmbedding, InvalidArgument, ProtocolError

AGGREGATE_TEMPLATE = """\
You will receive two pieces of information: New Information is detailed, and Existing Information is a summary from {n_children} previous entries. Your task is to merge these into a single, cohesive summary that highlights the most important insights.

- Focus on the key points from both inputs.

- Ensure the final summary combines the insights from both pieces of information.

- If the number of previous entries in Existing Information is accumulating (more than 2), focus on summarizing more concisely, only capturing the overarching theme, and getting more abstract in your summary.

Output the summary directly.

[New Information]
{new_content}

[Existing Information (from {n_children} previous entries)]
{current_content}

[ Output Summary ]
"""


def _check_inputs(existing, new, n_children):
    if not existing or not new:
        raise InvalidArgument("aggregate needs non-empty existing and new content")
    if n_children < 1:
        raise InvalidArgument(f"n_children must be >= 1, got {n_children}")


def render_aggregate_prompt(existing: str, new: str, n_children: int) -> str:
    _check_inputs(existing, new, n_children)
    return AGGREGATE_TEMPLATE.format(
        n_children=n_children, new_content=new, current_content=existing
    )


@dataclass
class SummarizerConfig:
    kind: str = "deterministic-mock"   # "remote-chat" | "mean-embedding"
    endpoint_url: Optional[str] = None
    model_name: Optional[str] = None
    api_key_env: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 8
    mock_budget: int = 200


class MockSummarizer:
    """``[AGG n=<n>] <existing[:budget]> || <new[:budget]>``"""

    mean_embedding = False

    def __init__(self, budget=200):
        if budget < 1:
            raise InvalidArgument("mock budget must be positive")
        self.budget = budget

    def aggregate(self, existing, new, n_children):
        _check_inputs(existing, new, n_children)
        b = self.budget
        return f"[AGG n={n_children}] {existing[:b]} || {new[:b]}"


class MeanEmbeddingSummarizer:
    """Content becomes a marker; the node embedding is the mean of its leaves."""

    mean_embedding = True

    def aggregate(self, existing, new, n_children):
        _check_inputs(existing, new, n_children)
        return f"[MEAN n={n_children}]"


class ChatClient:
    """OpenAI-compatible chat-completions client sending a single user message."""

    def __init__(self, config: SummarizerConfig, client=None, backoff=0.5):
        if not config.endpoint_url or not config.model_name:
            raise InvalidArgument("remote chat needs endpoint_url and model_name")
        self.model = config.model_name
        self._poster = JsonPoster(
            config.endpoint_url, config.api_key_env, config.timeout,
            config.max_retries, backoff, config.max_in_flight, client,
        )

    def complete(self, prompt):
        data = self._poster.post(
            {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        )
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError("chat response lacks choices[0].message.content") from exc
        if not isinstance(text, str) or not text.strip():
            raise ProtocolError("chat model returned an empty reply")
        return text


class RemoteChatSummarizer:
    mean_embedding = False

    def __init__(self, config: SummarizerConfig, client=None, backoff=0.5):
        self.chat = ChatClient(config, client=client, backoff=backoff)

    def aggregate(self, existing, new, n_children):
        return self.chat.complete(render_aggregate_prompt(existing, new, n_children))


def mean_embedding_merge(leaf_embeddings) -> np.ndarray:
    """L2-normalised arithmetic mean of a node's leaf-descendant embeddings."""
    vecs = [np.asarray(v, dtype=np.float64) for v in leaf_embeddings]
    if not vecs:
        raise InvalidArgument("mean of an empty embedding list")
    if len({v.shape for v in vecs}) != 1:
        raise InvalidArgument("leaf embeddings differ in dimension")
    mean = np.mean(vecs, axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise DegenerateEmbedding("leaf embeddings average to the zero vector")
    return mean / norm


def make_summarizer(config: SummarizerConfig, client=None):
    if config.kind == "deterministic-mock":
        return MockSummarizer(config.mock_budget)
    if config.kind == "mean-embedding":
        return MeanEmbeddingSummarizer()
    if config.kind == "remote-chat":
        return RemoteChatSummarizer(config, client=client)
    raise InvalidArgument(f"unknown summarizer kind {config.kind!r}")
