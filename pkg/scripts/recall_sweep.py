#!/usr/bin/env python3
"""Sweep probe counts on a synthetic topic-structured corpus.

Builds a corpus of topic -> item -> document clusters (the geometry real
review embeddings exhibit), partitions it, and reports item recall@k of the
approximate search against the exact path for each probe count. Useful for
picking a probes/partitions trade-off before deploying a large index.

Example:
    python scripts/recall_sweep.py --topics 50 --items-per-topic 20 \
        --docs-per-item 10 --dim 64 --partitions 64 --queries 100
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from convrec.corpus import DocKind, Document
from convrec.retrieval import (
    index_from_vectors,
    retrieve_items,
    retrieve_items_approx,
    with_partitions,
)


def topic_corpus(rng, n_topics: int, items_per_topic: int, docs_per_item: int, dim: int):
    """Clustered documents; perturbation arguments are target vector norms."""

    def jitter(base, norm):
        return base + (norm / np.sqrt(dim)) * rng.normal(size=base.shape)

    topics = rng.normal(size=(n_topics, dim))
    topics /= np.linalg.norm(topics, axis=1, keepdims=True)
    documents = []
    vectors = np.empty((n_topics * items_per_topic * docs_per_item, dim), dtype=np.float32)
    row = 0
    for t in range(n_topics):
        for i in range(items_per_topic):
            center = jitter(topics[t], 0.3)
            for d in range(docs_per_item):
                vectors[row] = jitter(center, 0.15).astype(np.float32)
                documents.append(
                    Document(
                        doc_id=f"doc-{t}-{i}-{d}",
                        item_id=f"item-{t}-{i}",
                        kind=DocKind.REVIEW,
                        text=f"doc {t} {i} {d}",
                    )
                )
                row += 1
    return documents, vectors, topics


def recall(exact: list[str], approx: list[str]) -> float:
    return len(set(exact) & set(approx)) / len(exact)


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--topics", type=int, default=50)
    parser.add_argument("--items-per-topic", type=int, default=20)
    parser.add_argument("--docs-per-item", type=int, default=10)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--partitions", type=int, default=64)
    parser.add_argument("--queries", type=int, default=100)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--m", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--probes",
        type=int,
        nargs="*",
        default=None,
        help="probe counts to sweep (default: powers of two up to --partitions)",
    )
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    rng = np.random.default_rng(args.seed)
    documents, vectors, topics = topic_corpus(
        rng, args.topics, args.items_per_topic, args.docs_per_item, args.dim
    )
    print(f"corpus: {len(documents)} docs, {args.topics * args.items_per_topic} items, dim {args.dim}")

    index = with_partitions(index_from_vectors(documents, vectors), p=args.partitions, seed=args.seed)
    queries = [
        topics[rng.integers(0, len(topics))] + (0.2 / np.sqrt(args.dim)) * rng.normal(size=args.dim)
        for _ in range(args.queries)
    ]
    exact_t0 = time.perf_counter()
    exact = [[s.item_id for s in retrieve_items(index, q, k=args.k, m=args.m)] for q in queries]
    exact_ms = (time.perf_counter() - exact_t0) * 1000 / len(queries)
    print(f"exact path: {exact_ms:.2f} ms/query")

    probe_counts = args.probes
    if not probe_counts:
        probe_counts = []
        probe = 1
        while probe < args.partitions:
            probe_counts.append(probe)
            probe *= 2
        probe_counts.append(args.partitions)

    print(f"{'probes':>7}  {'recall@' + str(args.k):>10}  {'ms/query':>9}")
    for probes in probe_counts:
        t0 = time.perf_counter()
        approx = [
            [s.item_id for s in retrieve_items_approx(index, q, k=args.k, m=args.m, probes=probes)]
            for q in queries
        ]
        per_query = (time.perf_counter() - t0) * 1000 / len(queries)
        mean_recall = float(np.mean([recall(e, a) for e, a in zip(exact, approx)]))
        print(f"{probes:>7}  {mean_recall:>10.3f}  {per_query:>9.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
