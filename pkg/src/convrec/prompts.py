"""Named-slot prompt templates loaded from data files.

Each template lives in its own UTF-8 text file under a prompts directory.
The first line declares the required slots (`# slots: a, b, c`, empty list
allowed); the rest of the file is the template body with `{slot}`
placeholders. Slot declarations and placeholders must agree exactly, checked
at load time so a malformed template fails fast.

Rendering substitutes each placeholder once, in a single pass, so slot
values containing braces (for example JSON state text) are inserted verbatim
and never re-scanned.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

logger = logging.getLogger(__name__)

_SLOT_HEADER = re.compile(r"^#\s*slots\s*:\s*(.*)$")
_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

DEFAULT_PROMPT_DIR = Path(__file__).parent / "prompts"

EXPECTED_TEMPLATE_IDS = frozenset(
    {
        "classify_intent",
        "update_constraints",
        "update_verdict_item",
        "generate_recommendation_query",
        "explain_recommendations",
        "determine_qa_source",
        "answer_from_metadata",
        "generate_qa_query",
        "answer_from_reviews",
        "greeting",
        "request_information",
        "respond_rejection",
        "respond_acceptance",
        "clarify",
    }
)


class PromptError(ValueError):
    """Malformed template file or bad render call."""


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str
    required_slots: frozenset[str]

    def __post_init__(self):
        found = set(_PLACEHOLDER.findall(self.text))
        declared = set(self.required_slots)
        if found != declared:
            missing = sorted(declared - found)
            undeclared = sorted(found - declared)
            raise PromptError(
                f"template {self.template_id!r} slot mismatch:"
                f" declared-but-unused {missing}, undeclared placeholders {undeclared}"
            )


class PromptLibrary:
    """Immutable collection of templates keyed by template_id."""

    def __init__(self, templates: Mapping[str, PromptTemplate]):
        self._templates = dict(templates)

    def catalog(self) -> list[str]:
        return sorted(self._templates)

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise PromptError(f"unknown template id {template_id!r}") from None

    def render(self, template_id: str, slot_values: Mapping[str, str]) -> str:
        template = self.get(template_id)
        missing = sorted(template.required_slots - set(slot_values))
        if missing:
            raise PromptError(f"template {template_id!r} missing slots: {missing}")
        extra = sorted(set(slot_values) - template.required_slots)
        if extra:
            logger.warning("template %r ignoring extra slots: %s", template_id, extra)
        values = {slot: str(slot_values[slot]) for slot in template.required_slots}
        return _PLACEHOLDER.sub(lambda match: values[match.group(1)], template.text)


def parse_template_file(template_id: str, raw: str) -> PromptTemplate:
    lines = raw.split("\n", 1)
    header = _SLOT_HEADER.match(lines[0].strip())
    if header is None:
        raise PromptError(f"template {template_id!r} must start with a '# slots:' line")
    declared = header.group(1).strip()
    slots = frozenset(s.strip() for s in declared.split(",") if s.strip()) if declared else frozenset()
    body = lines[1] if len(lines) > 1 else ""
    body = body.lstrip("\n").rstrip() + "\n"
    if not body.strip():
        raise PromptError(f"template {template_id!r} has an empty body")
    return PromptTemplate(template_id=template_id, text=body, required_slots=slots)


def load_library(directory=DEFAULT_PROMPT_DIR) -> PromptLibrary:
    """Load every *.txt template in the directory; fail fast on any bad file."""
    root = Path(directory)
    if not root.is_dir():
        raise PromptError(f"prompt directory {root} does not exist")
    templates: dict[str, PromptTemplate] = {}
    for path in sorted(root.glob("*.txt")):
        template_id = path.stem
        templates[template_id] = parse_template_file(template_id, path.read_text(encoding="utf-8"))
    missing = EXPECTED_TEMPLATE_IDS - set(templates)
    if missing:
        raise PromptError(f"prompt directory {root} missing templates: {sorted(missing)}")
    return PromptLibrary(templates)


_default_library: PromptLibrary | None = None


def default_library() -> PromptLibrary:
    """Library backed by the templates shipped with the package (cached)."""
    global _default_library
    if _default_library is None:
        _default_library = load_library(DEFAULT_PROMPT_DIR)
    return _default_library
