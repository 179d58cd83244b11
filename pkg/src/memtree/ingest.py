"""Corpus ingestion: token chunking and JSONL reading."""

import json
from dataclasses import dataclass, field
from typing import List, Optional

from .errors import InvalidArgument, SchemaError
from .tokenizers import DEFAULT_TOKENIZER

# max tokens per chunk; None inserts each record whole (dialogue rounds)
PROFILES = {
    "single-doc": 512,
    "multi-doc": 1024,
    "dialogue": None,
}


@dataclass
class Chunk:
    source_id: str
    index: int
    text: str
    token_count: int


def chunk_text(text, max_tokens, tokenizer=None, source_id="") -> List[Chunk]:
    """Greedy, non-overlapping packing of ``max_tokens`` tokens per chunk."""
    if max_tokens < 1:
        raise InvalidArgument("max_tokens must be >= 1")
    tokenizer = tokenizer or DEFAULT_TOKENIZER
    tokens = tokenizer.tokenize(text)
    out = []
    for i, start in enumerate(range(0, len(tokens), max_tokens)):
        piece = tokens[start:start + max_tokens]
        out.append(Chunk(source_id, i, tokenizer.detokenize(piece), len(piece)))
    return out


@dataclass
class Record:
    source_id: str
    text: str


@dataclass
class IngestResult:
    records: List[Record] = field(default_factory=list)
    errors: List[SchemaError] = field(default_factory=list)


def ingest_jsonl(stream, text_field="text", id_field: Optional[str] = "id", strict=False) -> IngestResult:
    """Read records from an iterable of JSONL lines, in order.

    Records lacking the text field (or that are not JSON objects) are
    collected as :class:`SchemaError` with their 1-based line number, or
    raised immediately when ``strict``. Blank lines are skipped. A record
    without ``id_field`` gets its line number as source id.
    """
    result = IngestResult()
    for lineno, line in enumerate(stream, 1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except ValueError as exc:
            err = SchemaError(lineno, f"malformed JSON ({exc.msg})")
        else:
            if not isinstance(obj, dict):
                err = SchemaError(lineno, "record is not a JSON object")
            elif not isinstance(obj.get(text_field), str) or not obj[text_field]:
                err = SchemaError(lineno, f"missing or empty text field {text_field!r}")
            else:
                sid = obj.get(id_field) if id_field else None
                result.records.append(Record(str(sid) if sid is not None else str(lineno), obj[text_field]))
                continue
        if strict:
            raise err
        result.errors.append(err)
    return result


def records_to_chunks(records, max_tokens, tokenizer=None) -> List[Chunk]:
    """Chunk every record in order; ``max_tokens=None`` keeps records whole."""
    tokenizer = tokenizer or DEFAULT_TOKENIZER
    out = []
    for rec in records:
        if max_tokens is None:
            out.append(Chunk(rec.source_id, 0, rec.text, len(tokenizer.tokenize(rec.text))))
        else:
            out.extend(chunk_text(rec.text, max_tokens, tokenizer, rec.source_id))
    return out
