"""Multi-label intent classification via one binary prompt per intent.

Each of the four intents gets its own yes/no prompt over the utterance plus
a short history window; the resulting set is the union of affirmative
answers, so any subset (including the empty set) is a legal outcome and the
order of the four checks never matters.
"""

from __future__ import annotations

import re
from enum import Enum
from typing import Sequence

from .llm import LlmBackend, user_request
from .prompts import PromptLibrary, default_library

DEFAULT_HISTORY_WINDOW = 4


class IntentError(Exception):
    """Unparseable classification response (after the one allowed reprompt)."""


class Intent(str, Enum):
    PROVIDE_PREFERENCE = "provide_preference"
    INQUIRE = "inquire"
    REJECT_RECOMMENDATION = "reject_recommendation"
    ACCEPT_RECOMMENDATION = "accept_recommendation"


INTENT_DESCRIPTIONS: dict[Intent, str] = {
    Intent.PROVIDE_PREFERENCE: (
        "The user states or refines what they want in an item, such as desired"
        " qualities, constraints, or things to avoid."
    ),
    Intent.INQUIRE: (
        "The user asks for more information about one or more of the recommended items."
    ),
    Intent.REJECT_RECOMMENDATION: (
        "The user turns down one of the recommended items, directly or indirectly."
    ),
    Intent.ACCEPT_RECOMMENDATION: (
        "The user approves one of the recommended items, directly or indirectly."
    ),
}

_YES_NO = re.compile(r"[\s\W_]*(yes|no)\b", re.IGNORECASE)

_ROLE_LABELS = {"user": "User", "assistant": "System", "system": "System"}


def format_history(history: Sequence[tuple[str, str]]) -> str:
    """Render (role, text) pairs as labeled lines; a placeholder when empty."""
    if not history:
        return "(no prior turns)"
    lines = []
    for role, text in history:
        label = _ROLE_LABELS.get(role, "System")
        lines.append(f"{label}: {text}")
    return "\n".join(lines)


def parse_binary_answer(raw_text: str) -> bool:
    """True for a leading YES token, False for NO; anything else is an error.

    Leading whitespace, punctuation, and markup are skipped, but a leading
    word other than yes/no (e.g. "Answer: yes") does not parse.
    """
    match = _YES_NO.match(raw_text or "")
    if match is None:
        raise IntentError(f"expected a leading YES or NO, got {raw_text[:80]!r}")
    return match.group(1).lower() == "yes"


def classify(
    llm: LlmBackend,
    utterance: str,
    recent_history: Sequence[tuple[str, str]] = (),
    library: PromptLibrary | None = None,
) -> frozenset[Intent]:
    """Classify one utterance into the subset of intents it expresses.

    Runs one binary prompt per intent; a parse failure triggers a single
    reprompt before erroring for that intent.
    """
    if not utterance or not utterance.strip():
        raise IntentError("utterance must be non-empty")
    lib = library if library is not None else default_library()
    history_text = format_history(recent_history)
    detected = set()
    for intent in Intent:
        prompt = lib.render(
            "classify_intent",
            {
                "intent_name": intent.value,
                "intent_description": INTENT_DESCRIPTIONS[intent],
                "history": history_text,
                "utterance": utterance,
            },
        )
        raw = llm.complete(user_request(prompt, max_tokens=8))
        try:
            is_yes = parse_binary_answer(raw)
        except IntentError:
            raw = llm.complete(user_request(prompt, max_tokens=8))
            try:
                is_yes = parse_binary_answer(raw)
            except IntentError as exc:
                raise IntentError(f"intent {intent.value!r}: {exc}") from exc
        if is_yes:
            detected.add(intent)
    return frozenset(detected)
