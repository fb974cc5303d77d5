"""Deterministic single-action selection per turn.

Fixed priority: greeting on the very first turn; verdict acknowledgments
when the user only accepted/rejected; the mandatory-information gate; then
answering inquiries; then recommending; clarification when nothing was
recognized. The gate guarantees no recommendation or answer is produced
while a mandatory preference is still missing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import AbstractSet

from .intents import Intent
from .state import DialogueState, StateSchema, missing_mandatory


class ActionType(str, Enum):
    GREETING = "greeting"
    REQUEST_INFORMATION = "request_information"
    RECOMMEND_AND_EXPLAIN = "recommend_and_explain"
    ANSWER = "answer"
    RESPOND_TO_REJECTION = "respond_to_rejection"
    RESPOND_TO_ACCEPTANCE = "respond_to_acceptance"
    CLARIFY = "clarify"


@dataclass(frozen=True)
class SystemAction:
    type: ActionType
    subkey: str | None = None

    def __post_init__(self):
        if self.type is ActionType.REQUEST_INFORMATION:
            if not self.subkey:
                raise ValueError("request_information must carry the missing subkey")
        elif self.subkey is not None:
            raise ValueError(f"{self.type.value} must not carry a subkey")

    def to_json_dict(self) -> dict:
        return {"type": self.type.value, "subkey": self.subkey}


def select_action(
    state: DialogueState,
    schema: StateSchema,
    intents: AbstractSet[Intent],
    is_first_turn: bool,
) -> SystemAction:
    """Pick exactly one action; total and deterministic over all inputs."""
    if is_first_turn:
        return SystemAction(ActionType.GREETING)
    helping = Intent.PROVIDE_PREFERENCE in intents or Intent.INQUIRE in intents
    if Intent.ACCEPT_RECOMMENDATION in intents and not helping:
        return SystemAction(ActionType.RESPOND_TO_ACCEPTANCE)
    if Intent.REJECT_RECOMMENDATION in intents and not helping:
        return SystemAction(ActionType.RESPOND_TO_REJECTION)
    missing = missing_mandatory(state, schema)
    if missing:
        return SystemAction(ActionType.REQUEST_INFORMATION, subkey=missing[0])
    if Intent.INQUIRE in intents:
        return SystemAction(ActionType.ANSWER)
    if intents:
        return SystemAction(ActionType.RECOMMEND_AND_EXPLAIN)
    return SystemAction(ActionType.CLARIFY)
