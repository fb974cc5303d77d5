"""The per-turn pipeline: classify intents, update state, act, respond.

The engine is stateless with respect to sessions: callers hand in the
current dialogue state plus a recent-history window and get back the new
state and a TurnResult. Nothing is committed until the turn finishes, so any
failure mid-pipeline leaves the caller's state exactly as it was.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from .embedding import EmbeddingError, EmbeddingProvider
from .intents import Intent, IntentError, classify, format_history
from .llm import LlmBackend, LlmError, user_request
from .policy import ActionType, SystemAction, select_action
from .prompts import PromptError, PromptLibrary, default_library
from .responder import (
    DEFAULT_QA_REVIEWS_PER_ITEM,
    NoCandidatesError,
    QA_SOURCE_METADATA,
    RecommendationResult,
    ResponderError,
    answer_from_metadata,
    answer_from_reviews,
    constraints_json,
    extract_fenced_json,
    recommend_and_explain,
    route_qa,
    write_action_response,
)
from .retrieval import DEFAULT_K, DEFAULT_M, RetrievalError, ReviewIndex
from .state import (
    DialogueState,
    StateError,
    StateSchema,
    VERDICT_ACCEPT,
    VERDICT_REJECT,
    apply_constraint_update,
    new_state,
    record_recommendation,
    record_verdict,
    to_json_dict,
)

logger = logging.getLogger(__name__)

DEFAULT_HISTORY_WINDOW = 4

NO_CANDIDATES_RESPONSE = (
    "I couldn't find any new options that match your preferences."
    " Could you broaden or change them?"
)


class EngineError(Exception):
    """Turn pipeline failure (bad LLM output for a state update, bad input)."""


# Everything a turn can legitimately fail with; the service maps these to a
# structured error response while leaving the session untouched.
TURN_ERRORS = (
    EngineError,
    StateError,
    LlmError,
    ResponderError,
    IntentError,
    PromptError,
    EmbeddingError,
    RetrievalError,
)


@dataclass(frozen=True)
class TurnResult:
    response_text: str
    action: SystemAction
    intents: frozenset[Intent]
    state_snapshot: dict
    diagnostics: dict | None

    def to_json_dict(self) -> dict:
        return {
            "response_text": self.response_text,
            "action": self.action.to_json_dict(),
            "intents": sorted(i.value for i in self.intents),
            "state_snapshot": self.state_snapshot,
            "diagnostics": self.diagnostics,
        }


class RecordingLibrary:
    """Prompt library wrapper that remembers which templates a turn rendered."""

    def __init__(self, inner: PromptLibrary):
        self._inner = inner
        self.used: list[str] = []

    def catalog(self) -> list[str]:
        return self._inner.catalog()

    def get(self, template_id: str):
        return self._inner.get(template_id)

    def render(self, template_id: str, slot_values) -> str:
        rendered = self._inner.render(template_id, slot_values)
        self.used.append(template_id)
        return rendered

    def used_unique(self) -> list[str]:
        seen: set[str] = set()
        ordered = []
        for template_id in self.used:
            if template_id not in seen:
                seen.add(template_id)
                ordered.append(template_id)
        return ordered


class Engine:
    """Turn processor bound to one index, one LLM backend, and one encoder."""

    def __init__(
        self,
        index: ReviewIndex,
        llm: LlmBackend,
        encoder: EmbeddingProvider,
        schema: StateSchema | None = None,
        library: PromptLibrary | None = None,
        k: int = DEFAULT_K,
        m: int = DEFAULT_M,
        qa_reviews_per_item: int = DEFAULT_QA_REVIEWS_PER_ITEM,
        history_window: int = DEFAULT_HISTORY_WINDOW,
    ):
        if encoder.dim is not None and encoder.dim != index.manifest.dim:
            raise EngineError(
                f"encoder dim {encoder.dim} does not match index dim {index.manifest.dim}"
            )
        self.index = index
        self.llm = llm
        self.encoder = encoder
        self.schema = schema if schema is not None else StateSchema()
        self.library = library if library is not None else default_library()
        self.k = k
        self.m = m
        self.qa_reviews_per_item = qa_reviews_per_item
        self.history_window = history_window

    def new_state(self) -> DialogueState:
        return new_state(self.schema)

    def greeting(self) -> str:
        """Opening message, produced before the user says anything."""
        action = select_action(self.new_state(), self.schema, frozenset(), is_first_turn=True)
        return write_action_response(self.llm, action, library=self.library)

    def process_turn(
        self,
        state: DialogueState,
        history: Sequence[tuple[str, str]],
        utterance: str,
    ) -> tuple[DialogueState, TurnResult]:
        """Run one full turn; returns (new state, result) or raises without effect."""
        if not utterance or not utterance.strip():
            raise EngineError("utterance must be non-empty")
        utterance = utterance.strip()
        recorder = RecordingLibrary(self.library)

        intents = classify(self.llm, utterance, history, library=recorder)

        working = state
        if Intent.PROVIDE_PREFERENCE in intents:
            working = self._update_constraints(working, history, utterance, recorder)
        if Intent.REJECT_RECOMMENDATION in intents:
            working = self._apply_verdict(working, history, utterance, VERDICT_REJECT, recorder)
        if Intent.ACCEPT_RECOMMENDATION in intents:
            working = self._apply_verdict(working, history, utterance, VERDICT_ACCEPT, recorder)

        action = select_action(working, self.schema, intents, is_first_turn=False)

        diagnostics: dict | None = None
        if action.type is ActionType.RECOMMEND_AND_EXPLAIN:
            working, response_text, diagnostics = self._recommend(working, recorder)
        elif action.type is ActionType.ANSWER:
            response_text, diagnostics = self._answer(working, utterance, recorder)
        else:
            response_text = write_action_response(self.llm, action, working, library=recorder)

        result = TurnResult(
            response_text=response_text,
            action=action,
            intents=intents,
            state_snapshot=to_json_dict(working),
            diagnostics=diagnostics,
        )
        return working, result

    def _update_constraints(
        self,
        state: DialogueState,
        history: Sequence[tuple[str, str]],
        utterance: str,
        recorder: RecordingLibrary,
    ) -> DialogueState:
        prompt = recorder.render(
            "update_constraints",
            {
                "subkeys": ", ".join(self.schema.constraint_subkeys),
                "constraints_json": constraints_json(state),
                "history": format_history(history),
                "utterance": utterance,
            },
        )
        raw = self.llm.complete(user_request(prompt))
        try:
            proposal = extract_fenced_json(raw)
        except ResponderError as exc:
            raise EngineError(f"constraint update response unparseable: {exc}") from exc
        if not isinstance(proposal, dict):
            raise EngineError(f"constraint update must be a JSON object, got {type(proposal).__name__}")
        return apply_constraint_update(state, self.schema, proposal)

    def _apply_verdict(
        self,
        state: DialogueState,
        history: Sequence[tuple[str, str]],
        utterance: str,
        verdict: str,
        recorder: RecordingLibrary,
    ) -> DialogueState:
        if not state.recommended_items:
            logger.warning("%s intent before any recommendation; nothing to record", verdict)
            return state
        catalog = self.index.item_catalog
        listing = "\n".join(
            f"{item_id}: {catalog[item_id].name if item_id in catalog else item_id}"
            for item_id in state.recommended_items
        )
        verdict_word = "accepted" if verdict == VERDICT_ACCEPT else "rejected"
        prompt = recorder.render(
            "update_verdict_item",
            {
                "verdict": verdict_word,
                "recommended_items": listing,
                "history": format_history(history),
                "utterance": utterance,
            },
        )
        raw = self.llm.complete(user_request(prompt, max_tokens=32)).strip()
        item_id = raw.splitlines()[0].strip().strip("`'\"") if raw else ""
        if item_id not in state.recommended_items:
            raise EngineError(
                f"{verdict_word} item {item_id!r} is not among the recommended items"
            )
        return record_verdict(state, item_id, verdict)

    def _recommend(
        self,
        state: DialogueState,
        recorder: RecordingLibrary,
    ) -> tuple[DialogueState, str, dict]:
        try:
            rec = recommend_and_explain(
                self.llm,
                self.encoder,
                self.index,
                state,
                k=self.k,
                m=self.m,
                library=recorder,
            )
        except NoCandidatesError as exc:
            diagnostics = {
                "query_text": exc.query_text,
                "scored_items": [],
                "prompt_ids_used": recorder.used_unique(),
            }
            return state, NO_CANDIDATES_RESPONSE, diagnostics
        updated = record_recommendation(state, [item.item_id for item in rec.items])
        diagnostics = {
            "query_text": rec.query_text,
            "scored_items": self._recommendation_entries(rec),
            "prompt_ids_used": recorder.used_unique(),
        }
        return updated, rec.explanation_text, diagnostics

    def _recommendation_entries(self, rec: RecommendationResult) -> list[dict]:
        entries = []
        for item, scored in zip(rec.items, rec.scored):
            evidence = [
                {
                    "doc_id": ev.doc_id,
                    "kind": ev.kind.value,
                    "score": ev.score,
                    "text": self.index.docs[self.index.row_of(ev.doc_id)].text,
                }
                for ev in scored.evidence
            ]
            entries.append(
                {
                    "item_id": item.item_id,
                    "name": item.name,
                    "fused_score": item.fused_score,
                    "evidence": evidence,
                }
            )
        return entries

    def _answer(
        self,
        state: DialogueState,
        utterance: str,
        recorder: RecordingLibrary,
    ) -> tuple[str, dict]:
        catalog = self.index.item_catalog
        routing = route_qa(self.llm, utterance, state, catalog, library=recorder)
        diagnostics: dict = {"qa_routing": routing.to_json_dict()}
        if routing.source == QA_SOURCE_METADATA:
            slices = []
            for item_id in sorted(routing.items_in_question):
                record = catalog.get(item_id)
                name = record.name if record is not None else item_id
                fields = {
                    field: (record.metadata.get(field) if record is not None else None)
                    for field in routing.fields
                }
                slices.append((name, fields))
            response_text = answer_from_metadata(self.llm, utterance, slices, library=recorder)
        else:
            answer = answer_from_reviews(
                self.llm,
                self.encoder,
                self.index,
                utterance,
                routing.items_in_question,
                n=self.qa_reviews_per_item,
                library=recorder,
            )
            response_text = answer.text
            diagnostics["query_text"] = answer.query_text
            diagnostics["scored_items"] = [
                {
                    "item_id": item_id,
                    "name": catalog[item_id].name if item_id in catalog else item_id,
                    "fused_score": None,
                    "evidence": [
                        {"doc_id": s.doc_id, "kind": "review", "score": s.score, "text": s.text}
                        for s in snippets
                    ],
                }
                for item_id, snippets in sorted(answer.retrieved.items())
            ]
        diagnostics["prompt_ids_used"] = recorder.used_unique()
        return response_text, diagnostics
