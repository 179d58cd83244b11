"""Command-line interface: one snapshot file per tree, load -> act -> save.

Exit codes: 0 success, 1 usage error, 2 provider error, 3 data error.
Errors go to stderr as one JSON line.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import errors
from .aggregation import ChatClient, SummarizerConfig, make_summarizer
from .embedding import EmbeddingProviderConfig, make_embedder
from .evaluation import evaluate_instances
from .ingest import PROFILES, ingest_jsonl, records_to_chunks
from .insertion import BatchInsertError, ThresholdPolicy, batch_insert, insert
from .persist import export_dot, read_snapshot, save_snapshot
from .retrieval import RetrievalQuery, render_answer_prompt, retrieve
from .tree import MemoryTree, tree_stats

EXIT_OK, EXIT_USAGE, EXIT_PROVIDER, EXIT_DATA = 0, 1, 2, 3

CONFIG_ENV = "MEMTREE_CONFIG"

# built-in values for every option that a config file may also set
DEFAULTS = {
    "embedder": "mock",
    "dimension": 64,
    "embed_url": None,
    "embed_model": None,
    "embed_key_env": "OPENAI_API_KEY",
    "summarizer": "mock",
    "chat_url": None,
    "chat_model": None,
    "chat_key_env": "OPENAI_API_KEY",
    "mock_budget": 200,
    "timeout": 30.0,
    "max_retries": 3,
    "workers": 1,
    "theta0": None,
    "lam": None,
    "threshold_mode": None,
    "k": 10,
    "theta_retrieve": 0.0,
    "mode": "collapsed",
    "budget": 8192,
    "profile": "dialogue",
    "chunk_tokens": None,
    "text_field": "text",
    "id_field": "id",
    "max_label_chars": 40,
    "depth_limit": None,
    "instances": 100,
    "n": 7,
    "beta": None,
    "seed": 0,
}


class UsageError(errors.MemTreeError):
    kind = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def _exit_code(exc):
    kind = getattr(exc, "kind", "")
    if isinstance(exc, BatchInsertError):
        exc = exc.cause
    if isinstance(exc, (errors.ProviderUnavailable, errors.ProtocolError)):
        return EXIT_PROVIDER
    if isinstance(exc, (UsageError, errors.InvalidArgument)) or kind == "usage":
        return EXIT_USAGE
    return EXIT_DATA


def _add_provider_flags(p):
    g = p.add_argument_group("providers")
    g.add_argument("--embedder", choices=["mock", "remote"])
    g.add_argument("--embed-url")
    g.add_argument("--embed-model")
    g.add_argument("--embed-key-env")
    g.add_argument("--summarizer", choices=["mock", "remote", "mean"])
    g.add_argument("--chat-url")
    g.add_argument("--chat-model")
    g.add_argument("--chat-key-env")
    g.add_argument("--mock-budget", type=int)
    g.add_argument("--timeout", type=float)
    g.add_argument("--max-retries", type=int)
    g.add_argument("--workers", type=int, help="parallel ancestor updates per insertion")


def _add_policy_flags(p):
    g = p.add_argument_group("threshold policy")
    g.add_argument("--theta0", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--threshold-mode", choices=["main-text", "normalized"])


def build_parser():
    parser = _Parser(prog="memtree", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("init", help="create an empty tree snapshot")
    p.add_argument("snapshot")
    p.add_argument("--dimension", type=int)
    p.add_argument("--force", action="store_true", help="overwrite an existing snapshot")
    _add_policy_flags(p)

    p = sub.add_parser("insert", help="insert one item")
    p.add_argument("snapshot")
    p.add_argument("text", nargs="?", help="item text (default: read stdin)")
    _add_provider_flags(p)
    _add_policy_flags(p)

    p = sub.add_parser("ingest", help="insert every chunk of a JSONL corpus")
    p.add_argument("snapshot")
    p.add_argument("jsonl")
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--chunk-tokens", type=int, help="override the profile's chunk size")
    p.add_argument("--text-field")
    p.add_argument("--id-field")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--progress", action="store_true", help="report progress on stderr")
    _add_provider_flags(p)
    _add_policy_flags(p)

    p = sub.add_parser("query", help="retrieve nodes for a query")
    p.add_argument("snapshot")
    p.add_argument("text")
    p.add_argument("--k", type=int)
    p.add_argument("--theta-retrieve", type=float)
    p.add_argument("--mode", choices=["collapsed", "traversal"])
    p.add_argument("--budget", type=int, help="token budget of the answer prompt")
    p.add_argument("--answer", action="store_true", help="ask the chat provider for an answer")
    p.add_argument("--show-prompt", action="store_true", help="print the rendered answer prompt")
    _add_provider_flags(p)

    p = sub.add_parser("stats", help="print tree statistics")
    p.add_argument("snapshot")

    p = sub.add_parser("export", help="write the tree as Graphviz DOT")
    p.add_argument("snapshot")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--max-label-chars", type=int)
    p.add_argument("--depth-limit", type=int)

    p = sub.add_parser("eval", help="check the beta/3 revenue bound on planted instances")
    p.add_argument("--instances", type=int)
    p.add_argument("--n", type=int, help="maximum points per instance (<= 8)")
    p.add_argument("--beta", type=float, help="default: exp(-lambda)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV file (default: stdout)")
    _add_policy_flags(p)
    return parser


class _Options:
    """Flags win over the config file, which wins over built-in defaults."""

    def __init__(self, args, config):
        self._args = args
        self._config = config

    def __getattr__(self, name):
        value = getattr(self._args, name, None)
        if value is not None:
            return value
        if name in self._config:
            return self._config[name]
        return DEFAULTS.get(name)


def _load_config(path):
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise errors.NotFound(f"config file {path} not found") from None
    except ValueError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _read_snapshot(path):
    p = Path(path)
    if not p.exists():
        raise errors.NotFound(f"snapshot {path} not found")
    return read_snapshot(p.read_bytes())


def _write_snapshot(path, tree, policy):
    p = Path(path)
    tmp = p.with_name(p.name + ".tmp")
    tmp.write_bytes(save_snapshot(tree, policy))
    os.replace(tmp, p)


def _policy(opts, base=None):
    base = base or ThresholdPolicy()
    return ThresholdPolicy(
        opts.theta0 if opts.theta0 is not None else base.theta0,
        opts.lam if opts.lam is not None else base.lam,
        opts.threshold_mode or base.mode,
    )


def _embedder(opts, dimension):
    kind = {"mock": "deterministic-mock", "remote": "remote"}[opts.embedder]
    return make_embedder(EmbeddingProviderConfig(
        kind, dimension, opts.embed_url, opts.embed_model, opts.embed_key_env,
        opts.timeout, opts.max_retries,
    ))


def _summarizer_config(opts):
    kind = {"mock": "deterministic-mock", "remote": "remote-chat", "mean": "mean-embedding"}[opts.summarizer]
    return SummarizerConfig(
        kind, opts.chat_url, opts.chat_model, opts.chat_key_env,
        opts.timeout, opts.max_retries, mock_budget=opts.mock_budget,
    )


def _print(obj, out):
    out.write(json.dumps(obj, ensure_ascii=False) + "\n")


def cmd_init(opts, out):
    path = Path(opts.snapshot)
    if path.exists() and not opts.force:
        raise UsageError(f"{path} exists; pass --force to overwrite")
    tree = MemoryTree(opts.dimension)
    policy = _policy(opts)
    _write_snapshot(path, tree, policy)
    _print({"snapshot": str(path), "nodes": len(tree), "policy": policy.as_dict()}, out)


def cmd_insert(opts, out):
    snap = _read_snapshot(opts.snapshot)
    text = opts.text if opts.text is not None else sys.stdin.read()
    policy = _policy(opts, snap.policy)
    embedder = _embedder(opts, snap.tree.embedding_dimension)
    report = insert(snap.tree, text, embedder, make_summarizer(_summarizer_config(opts)), policy, opts.workers)
    _write_snapshot(opts.snapshot, snap.tree, policy)
    _print(report.as_dict(), out)


def cmd_ingest(opts, out):
    snap = _read_snapshot(opts.snapshot)
    try:
        with open(opts.jsonl, encoding="utf-8") as fh:
            result = ingest_jsonl(fh, opts.text_field, opts.id_field, strict=opts.strict)
    except FileNotFoundError:
        raise errors.NotFound(f"corpus {opts.jsonl} not found") from None
    max_tokens = opts.chunk_tokens if opts.chunk_tokens is not None else PROFILES[opts.profile]
    chunks = records_to_chunks(result.records, max_tokens)
    policy = _policy(opts, snap.policy)
    embedder = _embedder(opts, snap.tree.embedding_dimension)
    summarizer = make_summarizer(_summarizer_config(opts))

    def progress(done, total):
        if opts.progress and (done % 10 == 0 or done == total):
            sys.stderr.write(json.dumps({"progress": done, "total": total}) + "\n")

    try:
        reports = batch_insert(snap.tree, [c.text for c in chunks], embedder, summarizer,
                               policy, opts.workers, progress)
    except BatchInsertError:
        # keep what was inserted before the failure
        _write_snapshot(opts.snapshot, snap.tree, policy)
        raise
    _write_snapshot(opts.snapshot, snap.tree, policy)
    _print({
        "records": len(result.records),
        "chunks": len(chunks),
        "inserted": len(reports),
        "nodes": len(snap.tree),
        "schema_errors": [{"line": e.line, "message": e.message} for e in result.errors],
    }, out)


def cmd_query(opts, out):
    snap = _read_snapshot(opts.snapshot)
    embedder = _embedder(opts, snap.tree.embedding_dimension)
    query = RetrievalQuery(opts.text, opts.k, opts.theta_retrieve, opts.mode)
    result = retrieve(snap.tree, query, embedder)
    for r in result.ranked:
        _print(r.as_dict(), out)
    if opts.answer or opts.show_prompt:
        prompt = render_answer_prompt(opts.text, result, opts.budget)
        if opts.show_prompt:
            _print({"prompt": prompt.text, "included": prompt.included, "truncated": prompt.truncated}, out)
        if opts.answer:
            cfg = _summarizer_config(opts)
            if not cfg.endpoint_url or not cfg.model_name:
                raise UsageError("--answer needs --chat-url and --chat-model")
            _print({"answer": ChatClient(cfg).complete(prompt.text)}, out)


def cmd_stats(opts, out):
    snap = _read_snapshot(opts.snapshot)
    _print(tree_stats(snap.tree).as_dict(), out)


def cmd_export(opts, out):
    snap = _read_snapshot(opts.snapshot)
    dot = export_dot(snap.tree, opts.max_label_chars, opts.depth_limit)
    if opts.out:
        Path(opts.out).write_text(dot)
    else:
        out.write(dot)


def cmd_eval(opts, out):
    policy = _policy(opts, ThresholdPolicy(0.4, 0.5, "main-text"))
    fh = open(opts.out, "w", newline="") if opts.out else out
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance", "otd_rev", "memtree_rev", "opt_rev", "ratio", "separation_ok",
                         "otd_separation_ok", "memtree_separation_ok", "bound"])
        for i, r in evaluate_instances(opts.instances, opts.n, opts.beta, opts.seed, policy):
            ratio = r.memtree_revenue / r.optimal_revenue if r.optimal_revenue > 0 else 1.0
            writer.writerow([
                i, repr(r.otd_revenue), repr(r.memtree_revenue), repr(r.optimal_revenue), repr(ratio),
                int(r.otd_separated and r.memtree_separated), int(r.otd_separated),
                int(r.memtree_separated), repr(r.bound),
            ])
    finally:
        if opts.out:
            fh.close()


COMMANDS = {
    "init": cmd_init,
    "insert": cmd_insert,
    "ingest": cmd_ingest,
    "query": cmd_query,
    "stats": cmd_stats,
    "export": cmd_export,
    "eval": cmd_eval,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        opts = _Options(args, _load_config(args.config))
        COMMANDS[args.command](opts, out)
    except errors.MemTreeError as exc:
        kind = "usage" if isinstance(exc, UsageError) else exc.kind
        return _fail(kind, str(exc), _exit_code(exc))
    except OSError as exc:
        return _fail("io-error", str(exc), EXIT_DATA)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
