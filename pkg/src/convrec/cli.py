"""Operator entry points: ingest, index build, chat, serve, eval.

Exit codes: 0 success, 1 validation or assertion failure, 2 usage error
(argparse's own convention).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, build_engine, load_config
from .corpus import (
    CorpusError,
    build_documents,
    dump_items,
    dump_reviews,
    load_items,
    load_reviews,
    parse_reviews,
)
from .embedding import EmbeddingError, LocalHashEmbedder, RemoteEmbedder
from .engine import TURN_ERRORS, TurnResult
from .llm import LlmError
from .retrieval import RetrievalError, build_index, save_index
from .state import serialize

USER_PROMPT = "you> "

FAILURE_ERRORS = (CorpusError, RetrievalError, EmbeddingError, ConfigError, LlmError, OSError, ValueError)


def cmd_ingest(args: argparse.Namespace) -> int:
    mode = "lenient" if args.lenient else "strict"
    try:
        items = load_items(args.items)
        with open(args.reviews, "rb") as handle:
            reviews, skips = parse_reviews(handle, {item.item_id for item in items}, mode=mode)
    except FAILURE_ERRORS as exc:
        print(f"ingest failed: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "items.jsonl").write_text(dump_items(items), encoding="utf-8")
    (out / "reviews.jsonl").write_text(dump_reviews(reviews), encoding="utf-8")
    print(f"{len(items)} items, {len(reviews)} reviews, {len(skips)} skipped")
    for skip in skips:
        print(f"skipped {skip.review_id}: {skip.reason}")
    return 0


def cmd_index_build(args: argparse.Namespace) -> int:
    corpus_dir = Path(args.corpus)
    items_path = corpus_dir / "items.jsonl"
    reviews_path = corpus_dir / "reviews.jsonl"
    if not items_path.exists() or not reviews_path.exists():
        print(f"corpus dir {corpus_dir} needs items.jsonl and reviews.jsonl", file=sys.stderr)
        return 1
    try:
        items = load_items(items_path)
        reviews, _ = load_reviews(reviews_path, {item.item_id for item in items})
        documents = build_documents(items, reviews)
        if args.encoder == "local":
            encoder = LocalHashEmbedder(dim=args.dim, seed=args.seed)
        else:
            if not args.base_url:
                print("--encoder remote requires --base-url", file=sys.stderr)
                return 1
            encoder = RemoteEmbedder(args.base_url)
        index = build_index(documents, encoder, items=items)
        save_index(index, args.out)
    except FAILURE_ERRORS as exc:
        print(f"index build failed: {exc}", file=sys.stderr)
        return 1
    print(
        f"indexed {index.manifest.doc_count} documents"
        f" (dim {index.manifest.dim}, provider {index.manifest.provider_id}) -> {args.out}"
    )
    return 0


def _history_tail(greeting: str, turns: list[tuple[str, str]], window: int) -> list[tuple[str, str]]:
    messages: list[tuple[str, str]] = [("assistant", greeting)]
    for utterance, response in turns:
        messages.append(("user", utterance))
        messages.append(("assistant", response))
    return messages[-(2 * window) :]


def cmd_chat(args: argparse.Namespace) -> int:
    try:
        engine = build_engine(load_config(args.config))
        greeting = engine.greeting()
    except FAILURE_ERRORS as exc:
        print(f"chat startup failed: {exc}", file=sys.stderr)
        return 1
    print(greeting)
    state = engine.new_state()
    turns: list[tuple[str, str]] = []
    while True:
        try:
            line = input(USER_PROMPT)
        except (EOFError, KeyboardInterrupt):
            print()
            return 0
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            return 0
        if line == "/state":
            print(serialize(state))
            continue
        history = _history_tail(greeting, turns, engine.history_window)
        try:
            state, result = engine.process_turn(state, history, line)
        except TURN_ERRORS as exc:
            print(f"[turn failed: {exc}]", file=sys.stderr)
            continue
        turns.append((line, result.response_text))
        print(result.response_text)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    try:
        config = load_config(args.config)
        engine = build_engine(config)
        ui_dir = Path(args.ui) if args.ui else None
        if ui_dir is not None and not ui_dir.is_dir():
            print(f"--ui directory {ui_dir} does not exist", file=sys.stderr)
            return 1
        app = create_app(engine, transcript_dir=config.transcript_dir, ui_dir=ui_dir)
    except FAILURE_ERRORS as exc:
        print(f"serve startup failed: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _subset_match(expected, actual, where: str, problems: list[str]) -> None:
    """Expected must be contained in actual: dict keys recursively, list elements by membership."""
    if isinstance(expected, dict):
        if not isinstance(actual, dict):
            problems.append(f"{where}: expected an object, got {type(actual).__name__}")
            return
        for key, sub in expected.items():
            if key not in actual:
                problems.append(f"{where}.{key}: missing")
            else:
                _subset_match(sub, actual[key], f"{where}.{key}", problems)
    elif isinstance(expected, list):
        if not isinstance(actual, list):
            problems.append(f"{where}: expected an array, got {type(actual).__name__}")
            return
        for element in expected:
            if isinstance(element, (dict, list)):
                if not any(_matches_quietly(element, candidate, where) for candidate in actual):
                    problems.append(f"{where}: no element matches {element!r}")
            elif element not in actual:
                problems.append(f"{where}: value {element!r} not present in {actual!r}")
    else:
        if expected != actual:
            problems.append(f"{where}: expected {expected!r}, got {actual!r}")


def _matches_quietly(expected, actual, where: str) -> bool:
    scratch: list[str] = []
    _subset_match(expected, actual, where, scratch)
    return not scratch


EXPECT_KEYS = {"intents", "action", "action_subkey", "state_contains", "response_contains"}


def _check_expectations(expect: dict, result: TurnResult, problems: list[str]) -> None:
    if "intents" in expect:
        expected = set(expect["intents"])
        got = {i.value for i in result.intents}
        if expected != got:
            problems.append(f"intents: expected {sorted(expected)}, got {sorted(got)}")
    if "action" in expect and expect["action"] != result.action.type.value:
        problems.append(f"action: expected {expect['action']!r}, got {result.action.type.value!r}")
    if "action_subkey" in expect and expect["action_subkey"] != result.action.subkey:
        problems.append(f"action_subkey: expected {expect['action_subkey']!r}, got {result.action.subkey!r}")
    if "response_contains" in expect and expect["response_contains"] not in result.response_text:
        problems.append(
            f"response: {expect['response_contains']!r} not in {result.response_text[:120]!r}"
        )
    if "state_contains" in expect:
        _subset_match(expect["state_contains"], result.state_snapshot, "state", problems)


def load_eval_script(path) -> tuple[dict | None, list[dict]]:
    """Script file: a JSON array of turns, or {"greeting_expect"?, "turns": [...]}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    greeting_expect = None
    if isinstance(raw, dict):
        greeting_expect = raw.get("greeting_expect")
        turns = raw.get("turns")
    else:
        turns = raw
    if not isinstance(turns, list) or not turns:
        raise ValueError("eval script must contain a non-empty list of turns")
    for i, turn in enumerate(turns):
        if not isinstance(turn, dict) or not isinstance(turn.get("utterance"), str) or not turn["utterance"]:
            raise ValueError(f"eval turn {i} needs a non-empty 'utterance'")
        expect = turn.get("expect", {})
        if not isinstance(expect, dict):
            raise ValueError(f"eval turn {i} 'expect' must be an object")
        unknown = set(expect) - EXPECT_KEYS
        if unknown:
            raise ValueError(f"eval turn {i} has unknown expectation keys: {sorted(unknown)}")
    return greeting_expect, turns


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        engine = build_engine(load_config(args.config))
        greeting_expect, turns = load_eval_script(args.script)
        greeting = engine.greeting()
    except FAILURE_ERRORS as exc:
        print(f"eval startup failed: {exc}", file=sys.stderr)
        return 1
    failures = 0
    if greeting_expect:
        problems: list[str] = []
        if "response_contains" in greeting_expect and greeting_expect["response_contains"] not in greeting:
            problems.append(f"greeting: {greeting_expect['response_contains']!r} not in {greeting!r}")
        if problems:
            failures += 1
            print("greeting: FAIL — " + "; ".join(problems))
        else:
            print("greeting: PASS")
    state = engine.new_state()
    transcript: list[tuple[str, str]] = []
    for number, turn in enumerate(turns, start=1):
        history = _history_tail(greeting, transcript, engine.history_window)
        problems = []
        try:
            state, result = engine.process_turn(state, history, turn["utterance"])
        except TURN_ERRORS as exc:
            failures += 1
            print(f"turn {number}: FAIL — turn error: {exc}")
            continue
        transcript.append((turn["utterance"], result.response_text))
        _check_expectations(turn.get("expect", {}), result, problems)
        if problems:
            failures += 1
            print(f"turn {number}: FAIL — " + "; ".join(problems))
        else:
            print(f"turn {number}: PASS")
    total = len(turns) + (1 if greeting_expect else 0)
    print(f"{total - failures}/{total} checks passed")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convrec", description="Conversational recommender toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="validate and normalize a corpus")
    ingest.add_argument("--items", required=True, help="items JSONL file")
    ingest.add_argument("--reviews", required=True, help="reviews JSONL file")
    ingest.add_argument("--out", required=True, help="output corpus directory")
    ingest.add_argument("--lenient", action="store_true", help="skip reviews of unknown items instead of failing")
    ingest.set_defaults(func=cmd_ingest)

    index = sub.add_parser("index", help="index operations")
    index_sub = index.add_subparsers(dest="index_command", required=True)
    build = index_sub.add_parser("build", help="embed a corpus into an index directory")
    build.add_argument("--corpus", required=True, help="corpus directory from ingest")
    build.add_argument("--out", required=True, help="output index directory")
    build.add_argument("--encoder", choices=("local", "remote"), default="local")
    build.add_argument("--dim", type=int, default=64, help="local encoder dimension")
    build.add_argument("--seed", type=int, default=0, help="local encoder seed")
    build.add_argument("--base-url", help="remote encoder base URL")
    build.set_defaults(func=cmd_index_build)

    chat = sub.add_parser("chat", help="interactive terminal chat")
    chat.add_argument("--config", required=True, help="service config JSON")
    chat.set_defaults(func=cmd_chat)

    serve = sub.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--config", required=True, help="service config JSON")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--ui", help="static directory to mount at / (browser chat UI)")
    serve.set_defaults(func=cmd_serve)

    ev = sub.add_parser("eval", help="run a scripted conversation with expectations")
    ev.add_argument("--config", required=True, help="service config JSON")
    ev.add_argument("--script", required=True, help="eval script JSON")
    ev.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
