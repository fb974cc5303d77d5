"""Review-fusion retrieval over an immutable embedding index.

Documents (reviews and per-item metadata renderings) are embedded once at
build time. A query is scored against documents by dot product; each item's
top document scores are averaged into a fused item score (late fusion). An
early-fusion baseline and a partitioned approximate search path share the
same result contract.

Dot products use a fixed summation order (elementwise products in index
order, adjacent-pair folding) so identical inputs score bit-identically on
any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import DocKind, Document, ItemRecord, dump_items, parse_items
from .embedding import EmbeddingProvider

ALL_KINDS = frozenset({DocKind.REVIEW, DocKind.METADATA})
DEFAULT_K = 2
DEFAULT_M = 5

MANIFEST_FILE = "manifest.json"
VECTORS_FILE = "vectors.bin"
DOCS_FILE = "docs.jsonl"
PARTITIONS_FILE = "partitions.json"
ITEMS_FILE = "items.jsonl"


class RetrievalError(Exception):
    """Index construction or query failure."""


@dataclass(frozen=True)
class IndexManifest:
    provider_id: str
    dim: int
    doc_count: int
    normalized: bool
    built_at: str | None
    default_k: int
    default_m: int

    def to_json_dict(self) -> dict:
        return {
            "provider_id": self.provider_id,
            "dim": self.dim,
            "doc_count": self.doc_count,
            "normalized": self.normalized,
            "built_at": self.built_at,
            "default_k": self.default_k,
            "default_m": self.default_m,
        }


@dataclass(frozen=True)
class Evidence:
    doc_id: str
    kind: DocKind
    score: float


@dataclass(frozen=True)
class ScoredItem:
    """An item with its fused score and the document scores that produced it."""

    item_id: str
    fused_score: float
    evidence: tuple[Evidence, ...]


@dataclass(frozen=True)
class PartitionLayout:
    """Clustered document rows for approximate search: centroids plus row assignments."""

    p: int
    seed: int
    default_probes: int
    centroids: np.ndarray  # (p, dim) float64
    rows_by_partition: tuple[tuple[int, ...], ...]


class ReviewIndex:
    """Immutable embedding index over documents, grouped by item.

    Construct through build_index / index_from_vectors / load_index. Vector
    rows are float32, row i belonging to docs[i]; the array is marked
    read-only after construction.
    """

    def __init__(
        self,
        manifest: IndexManifest,
        docs: Sequence[Document],
        vectors: np.ndarray,
        items: Sequence[ItemRecord] | None = None,
        partitions: PartitionLayout | None = None,
    ):
        if len(docs) != manifest.doc_count:
            raise RetrievalError(f"manifest doc_count {manifest.doc_count} != {len(docs)} documents")
        if vectors.shape != (manifest.doc_count, manifest.dim):
            raise RetrievalError(f"vector array shape {vectors.shape} != ({manifest.doc_count}, {manifest.dim})")
        self.manifest = manifest
        self.docs: tuple[Document, ...] = tuple(docs)
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        self.vectors.flags.writeable = False
        self.partitions = partitions
        self.items: tuple[ItemRecord, ...] = tuple(items) if items is not None else ()

        self._row_by_doc_id: dict[str, int] = {}
        item_rows: dict[str, list[int]] = {}
        for row, doc in enumerate(self.docs):
            if doc.doc_id in self._row_by_doc_id:
                raise RetrievalError(f"duplicate doc_id {doc.doc_id!r}")
            self._row_by_doc_id[doc.doc_id] = row
            item_rows.setdefault(doc.item_id, []).append(row)
        self.item_rows: dict[str, tuple[int, ...]] = {k: tuple(v) for k, v in item_rows.items()}

    def row_of(self, doc_id: str) -> int:
        try:
            return self._row_by_doc_id[doc_id]
        except KeyError:
            raise RetrievalError(f"unknown doc_id {doc_id!r}") from None

    @property
    def item_catalog(self) -> dict[str, ItemRecord]:
        return {item.item_id: item for item in self.items}


def _pairwise_fold(products: np.ndarray) -> np.ndarray:
    """Sum along the last axis by repeated adjacent-pair addition (fixed order)."""
    arr = products
    while arr.shape[-1] > 1:
        width = arr.shape[-1]
        if width % 2:
            pad = [(0, 0)] * (arr.ndim - 1) + [(0, 1)]
            arr = np.pad(arr, pad)
        arr = arr[..., 0::2] + arr[..., 1::2]
    return arr[..., 0]


def _as_query(vector, dim: int) -> np.ndarray:
    q = np.asarray(vector, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != dim:
        raise RetrievalError(f"query vector has shape {q.shape}, index dim is {dim}")
    return q


def _row_scores(index: ReviewIndex, q: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
    mat = index.vectors if rows is None else index.vectors[rows]
    return _pairwise_fold(mat.astype(np.float64) * q[np.newaxis, :])


def build_index(
    documents: Sequence[Document],
    provider: EmbeddingProvider,
    built_at: str | None = None,
    default_k: int = DEFAULT_K,
    default_m: int = DEFAULT_M,
    batch_size: int = 64,
    items: Sequence[ItemRecord] | None = None,
) -> ReviewIndex:
    """Encode every document with the provider and assemble an index.

    built_at is recorded verbatim in the manifest; it defaults to None so a
    rebuild of the same corpus is byte-identical on disk.
    """
    if not documents:
        raise RetrievalError("cannot build an index over zero documents")
    rows = []
    for start in range(0, len(documents), batch_size):
        chunk = documents[start : start + batch_size]
        try:
            rows.extend(provider.encode_batch([doc.text for doc in chunk]))
        except Exception as exc:
            raise RetrievalError(f"encoding failed near doc {chunk[0].doc_id!r}: {exc}") from exc
    vectors = np.asarray(rows, dtype=np.float32)
    manifest = IndexManifest(
        provider_id=provider.provider_id,
        dim=int(vectors.shape[1]),
        doc_count=len(documents),
        normalized=provider.normalized,
        built_at=built_at,
        default_k=default_k,
        default_m=default_m,
    )
    return ReviewIndex(manifest, documents, vectors, items=items)


def index_from_vectors(
    documents: Sequence[Document],
    vectors: np.ndarray,
    provider_id: str = "precomputed",
    normalized: bool = False,
    built_at: str | None = None,
    default_k: int = DEFAULT_K,
    default_m: int = DEFAULT_M,
    items: Sequence[ItemRecord] | None = None,
) -> ReviewIndex:
    """Assemble an index from precomputed vectors (row i embeds documents[i])."""
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[0] != len(documents):
        raise RetrievalError("vectors must be a (len(documents), dim) array")
    manifest = IndexManifest(
        provider_id=provider_id,
        dim=int(vectors.shape[1]),
        doc_count=len(documents),
        normalized=normalized,
        built_at=built_at,
        default_k=default_k,
        default_m=default_m,
    )
    return ReviewIndex(manifest, documents, vectors, items=items)


def score_documents(
    index: ReviewIndex,
    query_vector,
    candidate_doc_ids: Sequence[str] | None = None,
) -> list[tuple[str, float]]:
    """Dot-product scores for the candidate documents (all documents when None)."""
    q = _as_query(query_vector, index.manifest.dim)
    if candidate_doc_ids is None:
        scores = _row_scores(index, q)
        return [(doc.doc_id, float(scores[row])) for row, doc in enumerate(index.docs)]
    rows = np.asarray([index.row_of(doc_id) for doc_id in candidate_doc_ids], dtype=np.intp)
    if rows.size == 0:
        return []
    scores = _row_scores(index, q, rows)
    return [(doc_id, float(scores[i])) for i, doc_id in enumerate(candidate_doc_ids)]


def _fuse_items(
    index: ReviewIndex,
    scores: np.ndarray,
    scored_rows: set[int] | None,
    k: int,
    m: int,
    exclude_item_ids: Iterable[str],
    kinds: Iterable[DocKind],
) -> list[ScoredItem]:
    """Late fusion: per item, mean of its top-min(m, n_i) eligible document scores.

    scores is indexed by row; scored_rows restricts eligibility (approximate
    path). Results sorted by fused score descending, ties by item_id ascending.
    """
    kind_set = frozenset(kinds)
    if not kind_set or not kind_set <= ALL_KINDS:
        raise RetrievalError(f"kinds must be a non-empty subset of {{review, metadata}}, got {kind_set}")
    excluded = set(exclude_item_ids)
    results: list[ScoredItem] = []
    for item_id, rows in index.item_rows.items():
        if item_id in excluded:
            continue
        eligible = [
            r
            for r in rows
            if index.docs[r].kind in kind_set and (scored_rows is None or r in scored_rows)
        ]
        if not eligible:
            continue
        eligible.sort(key=lambda r: (-scores[r], r))
        top = eligible[: min(m, len(eligible))]
        total = 0.0
        for r in top:
            total += float(scores[r])
        fused = total / len(top)
        evidence = tuple(
            Evidence(index.docs[r].doc_id, index.docs[r].kind, float(scores[r])) for r in top
        )
        results.append(ScoredItem(item_id=item_id, fused_score=fused, evidence=evidence))
    results.sort(key=lambda s: (-s.fused_score, s.item_id))
    return results[:k]


def retrieve_items(
    index: ReviewIndex,
    query_vector,
    k: int = DEFAULT_K,
    m: int = DEFAULT_M,
    exclude_item_ids: Iterable[str] = (),
    kinds: Iterable[DocKind] = ALL_KINDS,
) -> list[ScoredItem]:
    """Exact late-fusion retrieval: top-k items by mean of top-m document scores."""
    if k < 1 or m < 1:
        raise RetrievalError(f"k and m must be >= 1 (got k={k}, m={m})")
    q = _as_query(query_vector, index.manifest.dim)
    scores = _row_scores(index, q)
    return _fuse_items(index, scores, None, k, m, exclude_item_ids, kinds)


def retrieve_items_early_fusion(
    index: ReviewIndex,
    query_vector,
    k: int = DEFAULT_K,
    exclude_item_ids: Iterable[str] = (),
) -> list[ScoredItem]:
    """Early-fusion baseline: score the mean of each item's review vectors.

    Evidence holds one entry per review vector averaged, all carrying the
    fused score (individual document scores are never computed on this path).
    """
    if k < 1:
        raise RetrievalError(f"k must be >= 1 (got k={k})")
    q = _as_query(query_vector, index.manifest.dim)
    excluded = set(exclude_item_ids)
    results: list[ScoredItem] = []
    for item_id, rows in index.item_rows.items():
        if item_id in excluded:
            continue
        review_rows = [r for r in rows if index.docs[r].kind is DocKind.REVIEW]
        if not review_rows:
            continue
        acc = np.zeros(index.manifest.dim, dtype=np.float64)
        for r in review_rows:
            acc += index.vectors[r].astype(np.float64)
        mean_vec = acc / len(review_rows)
        score = float(_pairwise_fold((mean_vec * q)[np.newaxis, :])[0])
        evidence = tuple(
            Evidence(index.docs[r].doc_id, DocKind.REVIEW, score) for r in review_rows
        )
        results.append(ScoredItem(item_id=item_id, fused_score=score, evidence=evidence))
    results.sort(key=lambda s: (-s.fused_score, s.item_id))
    return results[:k]


def top_item_documents(
    index: ReviewIndex,
    query_vector,
    item_id: str,
    n: int,
    kinds: Iterable[DocKind] = (DocKind.REVIEW,),
) -> list[tuple[str, float]]:
    """Top-n documents of one item by query score (used for per-item QA retrieval)."""
    if n < 1:
        raise RetrievalError(f"n must be >= 1 (got n={n})")
    kind_set = frozenset(kinds)
    rows = [r for r in index.item_rows.get(item_id, ()) if index.docs[r].kind in kind_set]
    if not rows:
        return []
    q = _as_query(query_vector, index.manifest.dim)
    scores = _row_scores(index, q, np.asarray(rows, dtype=np.intp))
    order = sorted(range(len(rows)), key=lambda i: (-scores[i], rows[i]))
    return [(index.docs[rows[i]].doc_id, float(scores[i])) for i in order[:n]]


def _kmeans(vectors: np.ndarray, p: int, seed: int, iterations: int) -> tuple[np.ndarray, np.ndarray]:
    """Plain Lloyd's k-means on float64 copies; empty clusters keep their centroid."""
    data = vectors.astype(np.float64)
    n = data.shape[0]
    rng = np.random.default_rng(seed)
    centroids = data[rng.choice(n, size=p, replace=False)].copy()
    assignment: np.ndarray | None = None
    for _ in range(iterations):
        # argmin ||x - c||^2 computed via the expanded form; ties -> lowest index
        cross = data @ centroids.T
        c_norm = np.einsum("ij,ij->i", centroids, centroids)
        new_assignment = np.argmin(c_norm[np.newaxis, :] - 2.0 * cross, axis=1)
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(p):
            members = np.nonzero(assignment == c)[0]
            if members.size:
                centroids[c] = data[members].mean(axis=0)
    assert assignment is not None  # iterations >= 1 is validated by the caller
    return centroids, assignment


def with_partitions(index: ReviewIndex, p: int, seed: int = 0, iterations: int = 20) -> ReviewIndex:
    """Return a new index carrying a p-way partition layout for approximate search."""
    if p < 1:
        raise RetrievalError(f"p must be >= 1 (got p={p})")
    if p > index.manifest.doc_count:
        raise RetrievalError(f"p={p} exceeds doc_count {index.manifest.doc_count}")
    if iterations < 1:
        raise RetrievalError(f"iterations must be >= 1 (got {iterations})")
    centroids, assignment = _kmeans(index.vectors, p, seed, iterations)
    rows_by_partition = tuple(
        tuple(int(r) for r in np.nonzero(assignment == c)[0]) for c in range(p)
    )
    default_probes = min(p, max(1, round(p**0.5)))
    layout = PartitionLayout(
        p=p,
        seed=seed,
        default_probes=default_probes,
        centroids=centroids,
        rows_by_partition=rows_by_partition,
    )
    return ReviewIndex(index.manifest, index.docs, index.vectors, items=index.items, partitions=layout)


def retrieve_items_approx(
    index: ReviewIndex,
    query_vector,
    k: int = DEFAULT_K,
    m: int = DEFAULT_M,
    exclude_item_ids: Iterable[str] = (),
    kinds: Iterable[DocKind] = ALL_KINDS,
    probes: int | None = None,
) -> list[ScoredItem]:
    """Approximate late fusion: score only documents in the probed partitions.

    Probes the `probes` centroids with the highest query dot product (layout
    default when None). Probing every partition reproduces the exact path.
    """
    layout = index.partitions
    if layout is None:
        raise RetrievalError("index has no partition layout; build one with with_partitions")
    if k < 1 or m < 1:
        raise RetrievalError(f"k and m must be >= 1 (got k={k}, m={m})")
    q = _as_query(query_vector, index.manifest.dim)
    n_probes = layout.default_probes if probes is None else probes
    if n_probes < 1:
        raise RetrievalError(f"probes must be >= 1 (got {n_probes})")
    n_probes = min(n_probes, layout.p)
    centroid_scores = _pairwise_fold(layout.centroids * q[np.newaxis, :])
    order = sorted(range(layout.p), key=lambda c: (-centroid_scores[c], c))
    probed = order[:n_probes]
    scored_rows: set[int] = set()
    for c in probed:
        scored_rows.update(layout.rows_by_partition[c])
    if not scored_rows:
        return []
    row_array = np.asarray(sorted(scored_rows), dtype=np.intp)
    scores = np.zeros(index.manifest.doc_count, dtype=np.float64)
    scores[row_array] = _row_scores(index, q, row_array)
    return _fuse_items(index, scores, scored_rows, k, m, exclude_item_ids, kinds)


def save_index(index: ReviewIndex, directory) -> Path:
    """Write the index directory: manifest.json, vectors.bin, docs.jsonl, and
    optionally partitions.json and items.jsonl. Deterministic given equal inputs."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / MANIFEST_FILE).write_text(
        json.dumps(index.manifest.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (out / VECTORS_FILE).write_bytes(index.vectors.astype("<f4").tobytes(order="C"))
    with open(out / DOCS_FILE, "w", encoding="utf-8") as handle:
        for doc in index.docs:
            handle.write(
                json.dumps(
                    {
                        "doc_id": doc.doc_id,
                        "item_id": doc.item_id,
                        "kind": doc.kind.value,
                        "text": doc.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    if index.partitions is not None:
        layout = index.partitions
        assignments = [0] * index.manifest.doc_count
        for c, rows in enumerate(layout.rows_by_partition):
            for r in rows:
                assignments[r] = c
        (out / PARTITIONS_FILE).write_text(
            json.dumps(
                {
                    "p": layout.p,
                    "seed": layout.seed,
                    "default_probes": layout.default_probes,
                    "centroids": [[float(x) for x in row] for row in layout.centroids],
                    "assignments": assignments,
                },
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    if index.items:
        (out / ITEMS_FILE).write_text(dump_items(index.items), encoding="utf-8")
    return out


def load_index(directory) -> ReviewIndex:
    """Load an index directory written by save_index (lossless round trip)."""
    root = Path(directory)
    manifest_path = root / MANIFEST_FILE
    if not manifest_path.exists():
        raise RetrievalError(f"no index manifest at {manifest_path}")
    raw = json.loads(manifest_path.read_text(encoding="utf-8"))
    manifest = IndexManifest(
        provider_id=raw["provider_id"],
        dim=int(raw["dim"]),
        doc_count=int(raw["doc_count"]),
        normalized=bool(raw["normalized"]),
        built_at=raw.get("built_at"),
        default_k=int(raw.get("default_k", DEFAULT_K)),
        default_m=int(raw.get("default_m", DEFAULT_M)),
    )
    docs: list[Document] = []
    with open(root / DOCS_FILE, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            docs.append(
                Document(
                    doc_id=obj["doc_id"],
                    item_id=obj["item_id"],
                    kind=DocKind(obj["kind"]),
                    text=obj["text"],
                )
            )
    blob = (root / VECTORS_FILE).read_bytes()
    vectors = np.frombuffer(blob, dtype="<f4").reshape(manifest.doc_count, manifest.dim)
    partitions = None
    partitions_path = root / PARTITIONS_FILE
    if partitions_path.exists():
        pdata = json.loads(partitions_path.read_text(encoding="utf-8"))
        assignments = pdata["assignments"]
        rows_by_partition = tuple(
            tuple(r for r, c in enumerate(assignments) if c == part) for part in range(pdata["p"])
        )
        partitions = PartitionLayout(
            p=int(pdata["p"]),
            seed=int(pdata.get("seed", 0)),
            default_probes=int(pdata.get("default_probes", 1)),
            centroids=np.asarray(pdata["centroids"], dtype=np.float64),
            rows_by_partition=rows_by_partition,
        )
    items: list[ItemRecord] = []
    items_path = root / ITEMS_FILE
    if items_path.exists():
        with open(items_path, "rb") as handle:
            items = parse_items(handle)
    return ReviewIndex(manifest, docs, vectors.copy(), items=items, partitions=partitions)
