"""Action execution: recommendations with explanations, and grounded QA.

Recommendation turns generate a retrieval query from the constraint maps,
run late-fusion retrieval (excluding items already recommended or rejected),
and ask the LLM to explain the winners from their own metadata and top
reviews. Question turns are routed between metadata fields and review
retrieval, then answered from exactly the context that routing selected.
All prompt context blocks are assembled in a fixed order (retrieval rank
for recommendations, item_id order for QA) so equal inputs produce equal
prompts.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import DocKind, ItemRecord, render_metadata_text, render_scalar
from .embedding import EmbeddingProvider
from .llm import LlmBackend, user_request
from .policy import ActionType, SystemAction
from .prompts import PromptLibrary, default_library
from .retrieval import (
    DEFAULT_K,
    DEFAULT_M,
    ReviewIndex,
    ScoredItem,
    retrieve_items,
    top_item_documents,
)
from .state import DialogueState, to_json_dict

logger = logging.getLogger(__name__)

DEFAULT_QA_REVIEWS_PER_ITEM = 3

QA_SOURCE_METADATA = "metadata"
QA_SOURCE_REVIEWS = "reviews"

_FENCED_JSON = re.compile(r"```[a-zA-Z0-9_-]*[ \t]*\n(.*?)```", re.DOTALL)

_RESPONSE_TEMPLATES = {
    ActionType.GREETING: "greeting",
    ActionType.REQUEST_INFORMATION: "request_information",
    ActionType.RESPOND_TO_REJECTION: "respond_rejection",
    ActionType.RESPOND_TO_ACCEPTANCE: "respond_acceptance",
    ActionType.CLARIFY: "clarify",
}


class ResponderError(Exception):
    """Action execution failure (bad LLM output, empty context, bad call)."""


class NoCandidatesError(ResponderError):
    """Retrieval had no items left to recommend (all excluded or corpus empty)."""

    def __init__(self, message: str, query_text: str):
        super().__init__(message)
        self.query_text = query_text


@dataclass(frozen=True)
class ReviewSnippet:
    doc_id: str
    score: float
    text: str


@dataclass(frozen=True)
class RecommendedItem:
    item_id: str
    name: str
    fused_score: float
    top_reviews: tuple[ReviewSnippet, ...]
    metadata: Mapping[str, object]


@dataclass(frozen=True)
class RecommendationResult:
    items: tuple[RecommendedItem, ...]
    explanation_text: str
    query_text: str
    scored: tuple[ScoredItem, ...]


@dataclass(frozen=True)
class QaRouting:
    source: str  # QA_SOURCE_METADATA or QA_SOURCE_REVIEWS
    fields: tuple[str, ...]
    items_in_question: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "source": self.source,
            "fields": list(self.fields),
            "items_in_question": list(self.items_in_question),
        }


@dataclass(frozen=True)
class ReviewAnswer:
    text: str
    query_text: str
    retrieved: Mapping[str, tuple[ReviewSnippet, ...]]


def constraints_json(state: DialogueState) -> str:
    """The two constraint maps as pretty JSON — the prompt view of the state."""
    snapshot = to_json_dict(state)
    return json.dumps(
        {
            "hard_constraints": snapshot["hard_constraints"],
            "soft_constraints": snapshot["soft_constraints"],
        },
        indent=2,
        ensure_ascii=False,
    )


def extract_fenced_json(text: str):
    """Parse the first fenced code block as JSON; fall back to the whole text."""
    match = _FENCED_JSON.search(text)
    candidate = match.group(1) if match else text
    try:
        return json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise ResponderError(f"response contains no parseable JSON: {exc}") from exc


def _first_line(text: str) -> str:
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    return ""


def _complete_nonempty(llm: LlmBackend, prompt: str, what: str, max_tokens: int = 512) -> str:
    raw = llm.complete(user_request(prompt, max_tokens=max_tokens))
    if not raw.strip():
        raise ResponderError(f"empty response for {what}")
    return raw.strip()


def _item_name(items_metadata: Mapping[str, ItemRecord], item_id: str) -> str:
    record = items_metadata.get(item_id)
    return record.name if record is not None else item_id


def generate_recommendation_query(
    llm: LlmBackend,
    state: DialogueState,
    library: PromptLibrary | None = None,
) -> str:
    """One-line retrieval query covering the state's constraint values."""
    lib = library if library is not None else default_library()
    prompt = lib.render("generate_recommendation_query", {"constraints_json": constraints_json(state)})
    query = _first_line(_complete_nonempty(llm, prompt, "recommendation query", max_tokens=128))
    if not query:
        raise ResponderError("recommendation query came back empty")
    return query


def recommend_and_explain(
    llm: LlmBackend,
    encoder: EmbeddingProvider,
    index: ReviewIndex,
    state: DialogueState,
    k: int = DEFAULT_K,
    m: int = DEFAULT_M,
    library: PromptLibrary | None = None,
) -> RecommendationResult:
    """Retrieve top-k fresh items for the current constraints and explain them.

    Items already recommended or rejected are excluded; exhausting the
    catalog raises NoCandidatesError before any explanation call.
    """
    lib = library if library is not None else default_library()
    query_text = generate_recommendation_query(llm, state, library=lib)
    query_vector = encoder.encode(query_text)
    exclude = set(state.recommended_items) | set(state.rejected_items)
    scored = retrieve_items(index, query_vector, k=k, m=m, exclude_item_ids=exclude)
    if not scored:
        raise NoCandidatesError("no items left to recommend after exclusions", query_text)

    catalog = index.item_catalog
    items: list[RecommendedItem] = []
    context_blocks: list[str] = []
    for entry in scored:
        record = catalog.get(entry.item_id)
        name = record.name if record is not None else entry.item_id
        metadata = dict(record.metadata) if record is not None else {}
        top = top_item_documents(index, query_vector, entry.item_id, n=m, kinds=(DocKind.REVIEW,))
        snippets = tuple(
            ReviewSnippet(doc_id=doc_id, score=score, text=index.docs[index.row_of(doc_id)].text)
            for doc_id, score in top
        )
        items.append(
            RecommendedItem(
                item_id=entry.item_id,
                name=name,
                fused_score=entry.fused_score,
                top_reviews=snippets,
                metadata=metadata,
            )
        )
        meta_text = render_metadata_text(record) if record is not None else f"name: {entry.item_id}"
        review_lines = "\n".join(f"- {s.text}" for s in snippets) or "- (no reviews)"
        context_blocks.append(f"Item: {name}\nMetadata: {meta_text}\nMost relevant reviews:\n{review_lines}")

    prompt = lib.render(
        "explain_recommendations",
        {"constraints_json": constraints_json(state), "items_context": "\n\n".join(context_blocks)},
    )
    explanation = _complete_nonempty(llm, prompt, "recommendation explanation")
    return RecommendationResult(
        items=tuple(items),
        explanation_text=explanation,
        query_text=query_text,
        scored=tuple(scored),
    )


def route_qa(
    llm: LlmBackend,
    utterance: str,
    state: DialogueState,
    items_metadata: Mapping[str, ItemRecord],
    library: PromptLibrary | None = None,
) -> QaRouting:
    """Decide which items a question is about and whether metadata can answer it.

    Items are resolved by case-insensitive name substring; with no name
    match, the question is taken to be about every recommended item not yet
    rejected. Unusable routing output (bad JSON, unknown field) falls back
    to review retrieval rather than failing the turn.
    """
    if not state.recommended_items:
        raise ResponderError("cannot answer an inquiry before anything was recommended")
    lowered = utterance.lower()
    in_question = [
        item_id
        for item_id in state.recommended_items
        if _item_name(items_metadata, item_id).lower() in lowered
    ]
    if not in_question:
        in_question = [i for i in state.recommended_items if i not in state.rejected_items]
    if not in_question:
        in_question = list(state.recommended_items)

    context_lines = []
    for item_id in sorted(in_question):
        record = items_metadata.get(item_id)
        if record is not None and record.metadata:
            context_lines.append(f"{item_id}: {render_metadata_text(record)}")
        else:
            context_lines.append(f"{item_id}: (no metadata)")
    lib = library if library is not None else default_library()
    prompt = lib.render(
        "determine_qa_source",
        {"items_metadata": "\n".join(context_lines), "utterance": utterance},
    )
    raw = _complete_nonempty(llm, prompt, "QA source routing", max_tokens=128)
    try:
        routing = extract_fenced_json(raw)
    except ResponderError as exc:
        logger.warning("QA routing unparseable (%s); falling back to reviews", exc)
        return QaRouting(QA_SOURCE_REVIEWS, (), tuple(in_question))
    if not isinstance(routing, dict) or routing.get("source") not in (QA_SOURCE_METADATA, QA_SOURCE_REVIEWS):
        logger.warning("QA routing malformed (%r); falling back to reviews", raw[:80])
        return QaRouting(QA_SOURCE_REVIEWS, (), tuple(in_question))
    if routing["source"] == QA_SOURCE_REVIEWS:
        return QaRouting(QA_SOURCE_REVIEWS, (), tuple(in_question))
    fields = routing.get("fields")
    if not isinstance(fields, list) or not fields or not all(isinstance(f, str) for f in fields):
        logger.warning("QA metadata routing without usable fields; falling back to reviews")
        return QaRouting(QA_SOURCE_REVIEWS, (), tuple(in_question))
    known_fields = set()
    for item_id in in_question:
        record = items_metadata.get(item_id)
        if record is not None:
            known_fields.update(record.metadata)
    unknown = [f for f in fields if f not in known_fields]
    if unknown:
        logger.warning("QA routing named unknown metadata fields %s; falling back to reviews", unknown)
        return QaRouting(QA_SOURCE_REVIEWS, (), tuple(in_question))
    return QaRouting(QA_SOURCE_METADATA, tuple(fields), tuple(in_question))


def answer_from_metadata(
    llm: LlmBackend,
    utterance: str,
    items_metadata_slices: Sequence[tuple[str, Mapping[str, object]]],
    library: PromptLibrary | None = None,
) -> str:
    """Answer using only the routed metadata fields (one slice per item)."""
    if not items_metadata_slices:
        raise ResponderError("metadata answer requires at least one item slice")
    lines = []
    for name, fields in items_metadata_slices:
        if fields:
            rendered = "; ".join(f"{field}: {render_scalar(value)}" for field, value in sorted(fields.items()))
        else:
            rendered = "(no matching fields)"
        lines.append(f"{name}: {rendered}")
    lib = library if library is not None else default_library()
    prompt = lib.render(
        "answer_from_metadata",
        {"metadata_context": "\n".join(lines), "utterance": utterance},
    )
    return _complete_nonempty(llm, prompt, "metadata answer")


def answer_from_reviews(
    llm: LlmBackend,
    encoder: EmbeddingProvider,
    index: ReviewIndex,
    utterance: str,
    items_in_question: Sequence[str],
    n: int = DEFAULT_QA_REVIEWS_PER_ITEM,
    library: PromptLibrary | None = None,
) -> ReviewAnswer:
    """Answer from each in-question item's top-n reviews for a generated QA query."""
    if not items_in_question:
        raise ResponderError("review answer requires at least one item in question")
    lib = library if library is not None else default_library()
    query_prompt = lib.render("generate_qa_query", {"utterance": utterance})
    query_text = _first_line(_complete_nonempty(llm, query_prompt, "QA query", max_tokens=128))
    if not query_text:
        raise ResponderError("QA query came back empty")
    query_vector = encoder.encode(query_text)

    catalog = index.item_catalog
    retrieved: dict[str, tuple[ReviewSnippet, ...]] = {}
    blocks: list[str] = []
    for item_id in sorted(items_in_question):
        top = top_item_documents(index, query_vector, item_id, n=n, kinds=(DocKind.REVIEW,))
        snippets = tuple(
            ReviewSnippet(doc_id=doc_id, score=score, text=index.docs[index.row_of(doc_id)].text)
            for doc_id, score in top
        )
        retrieved[item_id] = snippets
        name = _item_name(catalog, item_id)
        lines = "\n".join(f"- {s.text}" for s in snippets) or "- (no reviews)"
        blocks.append(f"Item: {name}\n{lines}")

    prompt = lib.render(
        "answer_from_reviews",
        {"reviews_context": "\n\n".join(blocks), "utterance": utterance},
    )
    text = _complete_nonempty(llm, prompt, "review answer")
    return ReviewAnswer(text=text, query_text=query_text, retrieved=retrieved)


def write_action_response(
    llm: LlmBackend,
    action: SystemAction,
    state: DialogueState | None = None,
    library: PromptLibrary | None = None,
) -> str:
    """Surface text for the non-retrieval actions (greeting, requests, verdicts).

    The state argument is accepted for signature stability; the shipped
    templates do not reference it.
    """
    template_id = _RESPONSE_TEMPLATES.get(action.type)
    if template_id is None:
        raise ResponderError(f"{action.type.value} is not a templated response action")
    slots: dict[str, str] = {}
    if action.type is ActionType.REQUEST_INFORMATION:
        slots["subkey"] = action.subkey or ""
    lib = library if library is not None else default_library()
    prompt = lib.render(template_id, slots)
    return _complete_nonempty(llm, prompt, f"{action.type.value} response", max_tokens=256)
