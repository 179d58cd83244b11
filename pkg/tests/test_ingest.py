import io
import json

import pytest
from hypothesis import given, strategies as st

from memtree.errors import InvalidArgument, SchemaError
from memtree.ingest import PROFILES, chunk_text, ingest_jsonl, records_to_chunks
from memtree.tokenizers import WhitespaceTokenizer

from conftest import FIXTURES


def words(n):
    return " ".join(f"w{i}" for i in range(n))


def test_chunk_1200_tokens_at_512():
    chunks = chunk_text(words(1200), 512, source_id="doc")
    assert [c.token_count for c in chunks] == [512, 512, 176]
    assert [c.index for c in chunks] == [0, 1, 2]
    assert {c.source_id for c in chunks} == {"doc"}
    assert chunks[1].text.split()[0] == "w512"


def test_chunk_short_and_empty():
    (only,) = chunk_text("a short text", 512)
    assert only.text == "a short text" and only.token_count == 3
    assert chunk_text("", 512) == []
    assert chunk_text("   \n ", 4) == []


def test_chunk_rejects_bad_size():
    with pytest.raises(InvalidArgument):
        chunk_text("x", 0)


@given(st.lists(st.text(alphabet="abc xyz\n", min_size=1, max_size=8), max_size=60), st.integers(1, 17))
def test_chunking_conserves_tokens(parts, max_tokens):
    text = " ".join(parts)
    tok = WhitespaceTokenizer()
    chunks = chunk_text(text, max_tokens, tok)
    assert all(1 <= c.token_count <= max_tokens for c in chunks)
    assert all(c.token_count == max_tokens for c in chunks[:-1])
    assert [t for c in chunks for t in tok.tokenize(c.text)] == tok.tokenize(text)


def test_profiles():
    assert PROFILES == {"single-doc": 512, "multi-doc": 1024, "dialogue": None}


def test_jsonl_three_valid_lines_in_order():
    src = io.StringIO('{"id": "a", "text": "one"}\n{"id": "b", "text": "two"}\n{"id": 3, "text": "three"}\n')
    result = ingest_jsonl(src)
    assert [(r.source_id, r.text) for r in result.records] == [("a", "one"), ("b", "two"), ("3", "three")]
    assert result.errors == []


def test_jsonl_missing_field_non_strict():
    lines = ['{"id": "a", "text": "one"}', '{"id": "b", "body": "two"}', '{"id": "c", "text": "three"}']
    result = ingest_jsonl(lines)
    assert [r.source_id for r in result.records] == ["a", "c"]
    (err,) = result.errors
    assert err.line == 2 and err.kind == "schema-error"


def test_jsonl_missing_field_strict():
    with pytest.raises(SchemaError) as info:
        ingest_jsonl(['{"text": "ok"}', '{"nope": 1}'], strict=True)
    assert info.value.line == 2


def test_jsonl_empty_and_blank_lines():
    assert ingest_jsonl(io.StringIO("")).records == []
    result = ingest_jsonl(["\n", '{"text": "x"}\n', "   \n"])
    assert [(r.source_id, r.text) for r in result.records] == [("2", "x")]


def test_jsonl_malformed_and_non_object():
    result = ingest_jsonl(['{"text": ', "[1, 2]", '{"text": ""}'])
    assert [e.line for e in result.errors] == [1, 2, 3]
    assert result.records == []


def test_jsonl_field_mapping_and_bytes():
    lines = [json.dumps({"key": "k1", "body": "héllo"}).encode("utf-8")]
    (rec,) = ingest_jsonl(lines, text_field="body", id_field="key").records
    assert (rec.source_id, rec.text) == ("k1", "héllo")


def test_fixture_corpus_is_fifty_chunks():
    with open(FIXTURES / "corpus.jsonl", encoding="utf-8") as f:
        result = ingest_jsonl(f)
    assert len(result.records) == 10 and result.errors == []
    chunks = records_to_chunks(result.records, 40)
    assert len(chunks) == 50
    assert all(c.token_count == 40 for c in chunks)
    whole = records_to_chunks(result.records, None)
    assert [c.token_count for c in whole] == [200] * 10
