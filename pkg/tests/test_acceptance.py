"""Acceptance checks, one per shipped guarantee; each prints its own verdict.

Every test evaluates one criterion end to end, prints a single
``[acceptance] <criterion>: PASS|FAIL`` line on the live terminal (bypassing
capture so the verdict is visible in any pytest run), and then asserts.
"""

import json
import time
from itertools import chain, combinations

import numpy as np

from convrec import cli
from convrec.corpus import DocKind
from convrec.embedding import LocalHashEmbedder
from convrec.intents import Intent, classify
from convrec.policy import ActionType, select_action
from convrec.retrieval import (
    Document,
    index_from_vectors,
    retrieve_items,
    retrieve_items_approx,
    retrieve_items_early_fusion,
    with_partitions,
)
from convrec.state import StateSchema, apply_constraint_update, missing_mandatory, new_state
from tests.conftest import FIXTURE_DIR, SAMPLE_DIR
from tests.helpers import corpus_to_index, random_corpus, random_state_walk
from tests.oracle import item_recall, late_fusion_oracle


def _report(capsys, label, problems):
    ok = not problems
    with capsys.disabled():
        line = f"[acceptance] {label}: {'PASS' if ok else 'FAIL'}"
        if not ok:
            line += f" — {problems[0]}"
        print(line, flush=True)
    assert ok, f"{label}: {problems[:3]}"


# --------------------------------------------------------------------------
# 1. late-fusion retrieval matches a brute-force oracle


def test_late_fusion_matches_oracle(capsys):
    problems = []
    started = time.monotonic()
    rng = np.random.default_rng(20240801)
    for trial in range(50):
        docs, vectors, query = random_corpus(rng, max_items=20, max_reviews=10, dim=16)
        index = corpus_to_index(docs, vectors)
        n_items = len({item_id for _, item_id, _ in docs})
        for k, m in ((1, 1), (3, 2), (n_items, 5), (n_items + 4, 10)):
            got = retrieve_items(index, query, k=k, m=m)
            expected = late_fusion_oracle(docs, vectors, query, k=k, m=m)
            if [g.item_id for g in got] != [e[0] for e in expected]:
                problems.append(
                    f"trial {trial} k={k} m={m}: ordering {[g.item_id for g in got]}"
                    f" != oracle {[e[0] for e in expected]}"
                )
                continue
            for g, (item_id, fused, evidence) in zip(got, expected):
                if abs(g.fused_score - fused) > 1e-9:
                    problems.append(
                        f"trial {trial} {item_id}: fused {g.fused_score} vs oracle {fused}"
                    )
                if [ev.doc_id for ev in g.evidence] != [doc_id for doc_id, _ in evidence]:
                    problems.append(f"trial {trial} {item_id}: evidence order differs")
                for ev, (_, score) in zip(g.evidence, evidence):
                    if abs(ev.score - score) > 1e-9:
                        problems.append(f"trial {trial} {item_id}: doc score differs")
    elapsed = time.monotonic() - started
    if elapsed >= 30:
        problems.append(f"took {elapsed:.1f}s (budget 30s)")
    _report(
        capsys,
        "late-fusion ranking matches brute-force oracle on 50 random corpora (scores within 1e-9)",
        problems,
    )


# --------------------------------------------------------------------------
# 2. early fusion coincides with late fusion when fusion is linear


def test_early_equals_late_fusion_under_linearity(capsys):
    problems = []
    rng = np.random.default_rng(20240802)
    for trial in range(20):
        docs, vectors, query = random_corpus(
            rng, max_items=12, max_reviews=8, dim=16, with_metadata=False
        )
        index = corpus_to_index(docs, vectors)
        n_items = len({item_id for _, item_id, _ in docs})
        late = retrieve_items(index, query, k=n_items, m=8, kinds=(DocKind.REVIEW,))
        early = retrieve_items_early_fusion(index, query, k=n_items)
        if [s.item_id for s in late] != [s.item_id for s in early]:
            problems.append(
                f"trial {trial}: ordering differs: {[s.item_id for s in late]}"
                f" vs {[s.item_id for s in early]}"
            )
            continue
        for l, e in zip(late, early):
            if abs(l.fused_score - e.fused_score) > 1e-6:
                problems.append(
                    f"trial {trial} {l.item_id}: late {l.fused_score} vs early {e.fused_score}"
                )
    _report(
        capsys,
        "mean-of-all-review scoring equals scoring the mean review vector (20 corpora, 1e-6)",
        problems,
    )


# --------------------------------------------------------------------------
# 3. partitioned approximate search: high recall, exact when probing fully


def _topic_corpus(rng, n_topics, items_per_topic, docs_per_item, dim):
    """Documents grouped into topics, the structure partitioned search exploits.

    Perturbation scales are per-vector norms (the per-component sigma is
    norm / sqrt(dim)), so topic, item, and document spreads stay meaningful
    in high dimension.
    """

    def jitter(base, norm):
        return base + (norm / np.sqrt(dim)) * rng.normal(size=base.shape)

    topics = rng.normal(size=(n_topics, dim))
    topics /= np.linalg.norm(topics, axis=1, keepdims=True)
    documents = []
    n_items = n_topics * items_per_topic
    vectors = np.empty((n_items * docs_per_item, dim), dtype=np.float32)
    row = 0
    for t in range(n_topics):
        for i in range(items_per_topic):
            center = jitter(topics[t], 0.3)
            item_id = f"item-{t}-{i}"
            for d in range(docs_per_item):
                vectors[row] = jitter(center, 0.15).astype(np.float32)
                documents.append(
                    Document(
                        doc_id=f"doc-{t}-{i}-{d}",
                        item_id=item_id,
                        kind=DocKind.REVIEW,
                        text=f"doc {t} {i} {d}",
                    )
                )
                row += 1
    return documents, vectors, topics


def test_approximate_search_recall_and_exactness(capsys):
    problems = []
    started = time.monotonic()
    rng = np.random.default_rng(20240803)
    documents, vectors, topics = _topic_corpus(
        rng, n_topics=50, items_per_topic=20, docs_per_item=10, dim=64
    )
    assert len(documents) == 10_000
    index = with_partitions(index_from_vectors(documents, vectors), p=64, seed=0)

    recalls = []
    for q in range(100):
        topic = topics[rng.integers(0, len(topics))]
        query = topic + (0.2 / np.sqrt(64)) * rng.normal(size=64)
        exact = [s.item_id for s in retrieve_items(index, query, k=10, m=10)]
        approx = [s.item_id for s in retrieve_items_approx(index, query, k=10, m=10, probes=8)]
        recalls.append(item_recall(exact, approx))
    mean_recall = float(np.mean(recalls))
    if mean_recall < 0.95:
        problems.append(f"recall@10 with 8/64 probes = {mean_recall:.3f} < 0.95")

    # probing every partition must reproduce the exact ranking bit for bit
    for q in range(5):
        query = topics[q] + (0.2 / np.sqrt(64)) * rng.normal(size=64)
        exact = retrieve_items(index, query, k=10, m=10)
        if retrieve_items_approx(index, query, k=10, m=10, probes=64) != exact:
            problems.append(f"probes=p differs from exact on query {q}")
        single = with_partitions(index, p=1, seed=0)
        if retrieve_items_approx(single, query, k=10, m=10) != exact:
            problems.append(f"p=1 differs from exact on query {q}")

    elapsed = time.monotonic() - started
    if elapsed >= 120:
        problems.append(f"took {elapsed:.1f}s (budget 120s)")
    _report(
        capsys,
        "partitioned search: recall@10 >= 0.95 at 8/64 probes on 10k docs; full probing is exact",
        problems,
    )


# --------------------------------------------------------------------------
# 4. dialogue-state operations keep every invariant under random sequences


def test_state_operations_hold_invariants(capsys):
    problems = []
    applied_total = 0
    for seed in range(1000):
        try:
            applied_total += random_state_walk(seed, n_ops=25)
        except AssertionError as exc:
            problems.append(f"seed {seed}: {exc}")
            break
    if not problems and applied_total < 1000:
        problems.append(f"walks applied only {applied_total} successful ops")
    _report(
        capsys,
        "state invariants hold across 1000 random operation sequences (serialize round-trips,"
        " failed ops mutate nothing)",
        problems,
    )


# --------------------------------------------------------------------------
# 5. the mandatory-information gate is airtight


def test_policy_gate_is_exhaustive(capsys):
    problems = []
    schema = StateSchema()
    full = apply_constraint_update(
        new_state(),
        schema,
        {"hard": {"location": ["downtown"], "cuisine_type": ["Japanese"]}, "soft": {}},
    )
    no_cuisine = apply_constraint_update(
        new_state(), schema, {"hard": {"location": ["downtown"]}, "soft": {}}
    )
    no_location = apply_constraint_update(
        new_state(), schema, {"hard": {"cuisine_type": ["Japanese"]}, "soft": {}}
    )
    states = [new_state(), no_cuisine, no_location, full]
    subsets = list(
        chain.from_iterable(combinations(list(Intent), r) for r in range(len(Intent) + 1))
    )
    for state in states:
        missing = missing_mandatory(state, schema)
        for subset in subsets:
            action = select_action(state, schema, frozenset(subset), is_first_turn=False)
            if missing and action.type in (
                ActionType.RECOMMEND_AND_EXPLAIN,
                ActionType.ANSWER,
                ActionType.CLARIFY,
            ):
                problems.append(
                    f"missing={missing} intents={sorted(i.value for i in subset)}"
                    f" -> {action.type.value}"
                )
    _report(
        capsys,
        "no recommendation or answer is ever produced while a mandatory preference is missing"
        " (all 16 intent subsets x 4 completeness states)",
        problems,
    )


# --------------------------------------------------------------------------
# 6. intent classification on the canonical utterance fixtures


def test_intent_classification_fixtures(capsys, scripted_llm):
    expected = {
        "I want a place with a very good scenic view.": {Intent.PROVIDE_PREFERENCE},
        "What kind of menu do they offer?": {Intent.INQUIRE},
        "Probably too expensive, what else is there?": {Intent.REJECT_RECOMMENDATION},
        "The first place looks good!": {Intent.ACCEPT_RECOMMENDATION},
        "Does Washoku Bistro have parking?": {Intent.INQUIRE, Intent.PROVIDE_PREFERENCE},
    }
    problems = []
    for utterance, intents in expected.items():
        got = classify(scripted_llm, utterance)
        if got != frozenset(intents):
            problems.append(
                f"{utterance!r}: expected {sorted(i.value for i in intents)},"
                f" got {sorted(i.value for i in got)}"
            )
    _report(
        capsys,
        "canonical utterances classify to their expected intent sets, including the"
        " multi-label question",
        problems,
    )


# --------------------------------------------------------------------------
# 7. the shipped six-turn conversation passes the eval harness


def test_shipped_conversation_fixture(capsys, scripted_config):
    problems = []
    started = time.monotonic()
    code = cli.main(
        [
            "eval",
            "--config", str(scripted_config),
            "--script", str(FIXTURE_DIR / "eval_conversation.json"),
        ]
    )
    stdout = capsys.readouterr().out
    elapsed = time.monotonic() - started
    if code != 0:
        problems.append(f"eval exited {code}; output: {stdout.strip().splitlines()[-3:]}")
    if "6/6 checks passed" not in stdout:
        problems.append(f"expected 6/6 checks, output ended: {stdout.strip().splitlines()[-1:]}")
    if stdout.count(": PASS") != 6:
        problems.append("expected 6 per-check PASS lines")
    if elapsed >= 10:
        problems.append(f"took {elapsed:.1f}s (budget 10s)")
    _report(
        capsys,
        "shipped six-turn conversation fixture passes the eval harness (greeting + 5 turns)",
        problems,
    )


# --------------------------------------------------------------------------
# 8. sample corpus tooling: counts and reproducible index builds


def test_sample_corpus_pipeline(capsys, tmp_path):
    problems = []
    code = cli.main(
        [
            "ingest",
            "--items", str(SAMPLE_DIR / "items.jsonl"),
            "--reviews", str(SAMPLE_DIR / "reviews.jsonl"),
            "--out", str(tmp_path / "corpus"),
        ]
    )
    stdout = capsys.readouterr().out
    if code != 0:
        problems.append(f"ingest exited {code}")
    if "12 items, 60 reviews, 0 skipped" not in stdout:
        problems.append(f"unexpected ingest summary: {stdout.strip()!r}")

    outputs = []
    for name in ("one", "two"):
        out = tmp_path / name
        code = cli.main(
            ["index", "build", "--corpus", str(tmp_path / "corpus"), "--out", str(out)]
        )
        stdout = capsys.readouterr().out
        if code != 0:
            problems.append(f"index build exited {code}")
        if "indexed 72 documents (dim 64, provider local-hash-64-0)" not in stdout:
            problems.append(f"unexpected build summary: {stdout.strip()!r}")
        outputs.append(out)
    for name in ("manifest.json", "docs.jsonl", "vectors.bin", "items.jsonl"):
        if (outputs[0] / name).read_bytes() != (outputs[1] / name).read_bytes():
            problems.append(f"rebuild changed {name}")
    _report(
        capsys,
        "sample corpus ingests to 12 items / 60 reviews / 72 documents and index builds"
        " are byte-identical",
        problems,
    )
