"""Conversational recommendation engine: dialogue-state tracking plus
late-fusion retrieval over item reviews and metadata, LLM-agnostic."""

from .corpus import Document, DocKind, ItemRecord, ReviewRecord, build_documents
from .embedding import EmbeddingProvider, LocalHashEmbedder, RemoteEmbedder
from .engine import Engine, TurnResult
from .intents import Intent, classify
from .policy import ActionType, SystemAction, select_action
from .retrieval import ReviewIndex, build_index, load_index, retrieve_items, save_index
from .state import DialogueState, StateSchema, new_state

__version__ = "0.1.0"

__all__ = [
    "ActionType",
    "DialogueState",
    "DocKind",
    "Document",
    "EmbeddingProvider",
    "Engine",
    "Intent",
    "ItemRecord",
    "LocalHashEmbedder",
    "RemoteEmbedder",
    "ReviewIndex",
    "ReviewRecord",
    "StateSchema",
    "SystemAction",
    "TurnResult",
    "build_documents",
    "build_index",
    "classify",
    "load_index",
    "new_state",
    "retrieve_items",
    "save_index",
    "select_action",
    "__version__",
]
