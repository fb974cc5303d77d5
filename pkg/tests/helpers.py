"""Shared test utilities: synthetic corpora, a stub HTTP server, and drivers."""

from __future__ import annotations

import json
import random
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from convrec import state as st
from convrec.corpus import DocKind, Document
from convrec.engine import Engine
from convrec.retrieval import ReviewIndex, index_from_vectors


def random_corpus(
    rng: np.random.Generator,
    max_items: int = 20,
    max_reviews: int = 10,
    dim: int = 16,
    with_metadata: bool = True,
    min_items: int = 1,
) -> tuple[list[tuple[str, str, str]], np.ndarray, np.ndarray]:
    """Random document layout plus float32 vectors and a float64 query.

    Returns (docs, vectors, query) where docs[i] is (doc_id, item_id, kind)
    and vectors[i] embeds it — the plain-tuple shape the oracles consume.
    """
    n_items = int(rng.integers(min_items, max_items + 1))
    docs: list[tuple[str, str, str]] = []
    for i in range(n_items):
        item_id = f"item_{i:03d}"
        for r in range(int(rng.integers(1, max_reviews + 1))):
            docs.append((f"review:{item_id}_r{r}", item_id, "review"))
        if with_metadata:
            docs.append((f"meta:{item_id}", item_id, "metadata"))
    vectors = rng.standard_normal((len(docs), dim)).astype(np.float32)
    query = rng.standard_normal(dim)
    return docs, vectors, query


def corpus_to_index(docs: list[tuple[str, str, str]], vectors: np.ndarray) -> ReviewIndex:
    """Production index over a synthetic corpus (vectors used verbatim)."""
    documents = [
        Document(doc_id=doc_id, item_id=item_id, kind=DocKind(kind), text=doc_id)
        for doc_id, item_id, kind in docs
    ]
    return index_from_vectors(documents, vectors)


class _StubHandler(BaseHTTPRequestHandler):
    """Replays canned responses and logs request bodies for assertions."""

    def do_POST(self):  # noqa: N802 (http.server naming)
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length).decode("utf-8") if length else ""
        try:
            body = json.loads(raw) if raw else None
        except json.JSONDecodeError:
            body = raw
        self.server.request_log.append(
            {"path": self.path, "headers": dict(self.headers), "body": body}
        )
        status, payload = self.server.next_response()
        data = payload if isinstance(payload, str) else json.dumps(payload)
        encoded = data.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(encoded)))
        self.end_headers()
        self.wfile.write(encoded)

    def log_message(self, *args):  # keep test output clean
        pass


class _StubServer(ThreadingHTTPServer):
    def __init__(self, address, handler, responses):
        super().__init__(address, handler)
        self.responses = list(responses)
        self.request_log: list[dict] = []
        self._lock = threading.Lock()

    def next_response(self):
        with self._lock:
            if len(self.responses) > 1:
                return self.responses.pop(0)
            return self.responses[0]


@contextmanager
def stub_http_server(responses):
    """Serve canned (status, body) responses on a loopback port.

    Responses are consumed in order; the final one repeats forever. Yields
    (base_url, request_log).
    """
    server = _StubServer(("127.0.0.1", 0), _StubHandler, responses)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}", server.request_log
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)


def run_conversation(engine: Engine, utterances):
    """Drive the engine like the service does: greeting, then turn by turn."""
    state = engine.new_state()
    messages: list[tuple[str, str]] = [("assistant", engine.greeting())]
    results = []
    for utterance in utterances:
        history = messages[-(2 * engine.history_window):]
        state, result = engine.process_turn(state, history, utterance)
        messages.append(("user", utterance))
        messages.append(("assistant", result.response_text))
        results.append(result)
    return state, results


def random_state_walk(seed: int, n_ops: int, schema: st.StateSchema | None = None) -> int:
    """Apply a random op sequence to a dialogue state, checking every invariant.

    After each op the state must satisfy check_invariants and survive a
    serialize/deserialize round trip unchanged; ops that raise must leave the
    prior state exactly as it was. Returns the number of ops that applied.
    """
    rng = random.Random(seed)
    schema = schema or st.StateSchema()
    known = list(schema.constraint_subkeys)
    unknown = ["parking", "music", "view"]
    values = [f"value {i}" for i in range(8)]
    item_ids = [f"item{i}" for i in range(6)]

    def random_proposal() -> dict:
        proposal: dict = {}
        for side in ("hard", "soft"):
            if rng.random() < 0.3:
                continue
            side_map: dict = {}
            for _ in range(rng.randint(1, 3)):
                subkey = rng.choice(known + unknown)
                chosen = rng.sample(values, rng.randint(1, 2))
                if rng.random() < 0.3:
                    chosen = ["remove:" + chosen[0]] + chosen[1:]
                side_map[subkey] = chosen[0] if rng.random() < 0.2 else chosen
            proposal[side] = side_map
        return proposal

    state = st.new_state(schema)
    applied = 0
    for _ in range(n_ops):
        op = rng.choice(["update", "recommend", "verdict", "bad_update", "bad_verdict"])
        before = st.serialize(state)
        try:
            if op == "update":
                state = st.apply_constraint_update(state, schema, random_proposal())
            elif op == "recommend":
                state = st.record_recommendation(
                    state, rng.sample(item_ids, rng.randint(1, 3))
                )
            elif op == "verdict":
                pool = list(state.recommended_items) or item_ids
                verdict = rng.choice([st.VERDICT_ACCEPT, st.VERDICT_REJECT])
                state = st.record_verdict(state, rng.choice(pool), verdict)
            elif op == "bad_update":
                bad = rng.choice(
                    [
                        {"wrong_section": {}},
                        {"hard": {"location": [""]}},
                        {"soft": {"cuisine_type": [17]}},
                        {"hard": {"location": "remove:   "}},
                    ]
                )
                state = st.apply_constraint_update(state, schema, bad)
            else:
                state = st.record_verdict(
                    state, "never_recommended_item", rng.choice([st.VERDICT_ACCEPT, st.VERDICT_REJECT])
                )
        except st.StateError:
            assert st.serialize(state) == before, f"failed op {op!r} altered the state"
            if op in ("bad_update", "bad_verdict"):
                pass  # expected failures
        else:
            assert op not in ("bad_update", "bad_verdict"), f"op {op!r} should have raised"
            applied += 1
        st.check_invariants(state, schema)
        assert st.deserialize(schema, st.serialize(state)) == state
    return applied
