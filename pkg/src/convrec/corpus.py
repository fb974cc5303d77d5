"""Corpus ingestion: line-delimited JSON items and reviews, and the document set built from them.

A corpus is two JSONL files: ``items.jsonl`` (one catalog item per line) and
``reviews.jsonl`` (one review per line, keyed to an item). Indexing consumes
one document per review plus one metadata pseudo-document per item.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator, Mapping, Sequence, Union

Scalar = Union[str, int, float, bool, None]


class CorpusError(ValueError):
    """Malformed or inconsistent corpus input."""


@dataclass(frozen=True)
class ItemRecord:
    """A catalog item: unique id, display name, and a flat metadata map."""

    item_id: str
    name: str
    metadata: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class ReviewRecord:
    """One review text bound to an item."""

    review_id: str
    item_id: str
    text: str


class DocKind(str, Enum):
    REVIEW = "review"
    METADATA = "metadata"


@dataclass(frozen=True)
class Document:
    """An indexable unit: either a review or an item's metadata rendering."""

    doc_id: str
    item_id: str
    kind: DocKind
    text: str


@dataclass(frozen=True)
class SkippedReview:
    review_id: str
    item_id: str
    reason: str

    def to_json_dict(self) -> dict:
        return {"review_id": self.review_id, "item_id": self.item_id, "reason": self.reason}


def _iter_json_lines(stream: Union[IO[bytes], IO[str], Iterable[Union[bytes, str]]]) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, parsed object) for each non-blank line."""
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"line {lineno}: not valid UTF-8 ({exc})") from exc
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise CorpusError(f"line {lineno}: expected a JSON object, got {type(obj).__name__}")
        yield lineno, obj


def _require_string(obj: dict, key: str, lineno: int) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value.strip():
        raise CorpusError(f"line {lineno}: missing or empty {key}")
    return value.strip()


def parse_items(stream: Union[IO[bytes], IO[str], Iterable[Union[bytes, str]]]) -> list[ItemRecord]:
    """Parse items JSONL into records, in file order.

    Unknown top-level keys are ignored; everything the engine consumes lives in
    item_id, name, and metadata. Raises CorpusError with the offending line
    number on malformed JSON, missing/empty required fields, duplicate ids, or
    non-scalar metadata values.
    """
    records: list[ItemRecord] = []
    seen: set[str] = set()
    for lineno, obj in _iter_json_lines(stream):
        item_id = _require_string(obj, "item_id", lineno)
        name = _require_string(obj, "name", lineno)
        if item_id in seen:
            raise CorpusError(f"line {lineno}: duplicate item_id {item_id!r}")
        seen.add(item_id)
        raw_meta = obj.get("metadata", {})
        if raw_meta is None:
            raw_meta = {}
        if not isinstance(raw_meta, dict):
            raise CorpusError(f"line {lineno}: metadata must be a JSON object")
        metadata: dict[str, Scalar] = {}
        for key, value in raw_meta.items():
            if not isinstance(key, str) or not key.strip():
                raise CorpusError(f"line {lineno}: empty metadata field name")
            if value is not None and not isinstance(value, (str, int, float, bool)):
                raise CorpusError(
                    f"line {lineno}: metadata field {key!r} has non-scalar value of type {type(value).__name__}"
                )
            metadata[key] = value
        records.append(ItemRecord(item_id=item_id, name=name, metadata=metadata))
    return records


def parse_reviews(
    stream: Union[IO[bytes], IO[str], Iterable[Union[bytes, str]]],
    known_item_ids: Iterable[str],
    mode: str = "strict",
) -> tuple[list[ReviewRecord], list[SkippedReview]]:
    """Parse reviews JSONL, checking references against known items.

    In strict mode an orphan review (unknown item_id) is an error; in lenient
    mode it is dropped and returned in the skip report. Duplicate review ids
    and empty texts are errors in both modes.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"mode must be 'strict' or 'lenient', got {mode!r}")
    known = set(known_item_ids)
    records: list[ReviewRecord] = []
    skipped: list[SkippedReview] = []
    seen: set[str] = set()
    for lineno, obj in _iter_json_lines(stream):
        review_id = _require_string(obj, "review_id", lineno)
        item_id = _require_string(obj, "item_id", lineno)
        text = obj.get("text")
        if not isinstance(text, str) or not text.strip():
            raise CorpusError(f"line {lineno}: review {review_id!r} has empty text")
        if review_id in seen:
            raise CorpusError(f"line {lineno}: duplicate review_id {review_id!r}")
        seen.add(review_id)
        if item_id not in known:
            if mode == "strict":
                raise CorpusError(
                    f"line {lineno}: review {review_id!r} references unknown item {item_id!r}"
                )
            skipped.append(SkippedReview(review_id, item_id, "unknown item_id"))
            continue
        records.append(ReviewRecord(review_id=review_id, item_id=item_id, text=text.strip()))
    return records, skipped


def render_scalar(value: Scalar) -> str:
    """Deterministic text form of a metadata value (JSON-style for non-strings)."""
    if isinstance(value, str):
        return value
    return json.dumps(value)


def render_metadata_text(item: ItemRecord) -> str:
    """Render an item's metadata pseudo-document, fields sorted by name."""
    parts = [f"name: {item.name}"]
    for key in sorted(item.metadata):
        parts.append(f"{key}: {render_scalar(item.metadata[key])}")
    return "; ".join(parts)


def review_doc_id(review_id: str) -> str:
    return f"review:{review_id}"


def metadata_doc_id(item_id: str) -> str:
    return f"meta:{item_id}"


def build_documents(items: Sequence[ItemRecord], reviews: Sequence[ReviewRecord]) -> list[Document]:
    """Assemble the indexable document set: all reviews, then one metadata doc per item."""
    item_ids = {item.item_id for item in items}
    docs: list[Document] = []
    for review in reviews:
        if review.item_id not in item_ids:
            raise CorpusError(f"review {review.review_id!r} references unknown item {review.item_id!r}")
        docs.append(
            Document(
                doc_id=review_doc_id(review.review_id),
                item_id=review.item_id,
                kind=DocKind.REVIEW,
                text=review.text,
            )
        )
    for item in items:
        docs.append(
            Document(
                doc_id=metadata_doc_id(item.item_id),
                item_id=item.item_id,
                kind=DocKind.METADATA,
                text=render_metadata_text(item),
            )
        )
    return docs


def dump_items(items: Sequence[ItemRecord]) -> str:
    """Serialize items back to canonical JSONL (inverse of parse_items)."""
    lines = []
    for item in items:
        lines.append(
            json.dumps(
                {"item_id": item.item_id, "name": item.name, "metadata": dict(item.metadata)},
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def dump_reviews(reviews: Sequence[ReviewRecord]) -> str:
    """Serialize reviews back to canonical JSONL (inverse of parse_reviews)."""
    lines = []
    for review in reviews:
        lines.append(
            json.dumps(
                {"review_id": review.review_id, "item_id": review.item_id, "text": review.text},
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def load_items(path) -> list[ItemRecord]:
    with open(path, "rb") as handle:
        return parse_items(handle)


def load_reviews(path, known_item_ids: Iterable[str], mode: str = "strict") -> tuple[list[ReviewRecord], list[SkippedReview]]:
    with open(path, "rb") as handle:
        return parse_reviews(handle, known_item_ids, mode=mode)
