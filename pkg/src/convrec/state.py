"""Semi-structured JSON dialogue state.

The state tracks what the user wants (hard/soft constraint maps keyed by a
configurable subkey list) and what the system has proposed (recommended /
rejected / accepted item id lists). All values are immutable; every update
returns a new state and never mutates its inputs, so a failed operation
leaves the caller's state untouched.

Wire format: a JSON object with exactly five top-level keys, in order —
hard_constraints, soft_constraints, recommended_items, rejected_items,
accepted_items. Constraint maps omit subkeys with no values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

STATE_KEYS = (
    "hard_constraints",
    "soft_constraints",
    "recommended_items",
    "rejected_items",
    "accepted_items",
)

DEFAULT_SUBKEYS = (
    "location",
    "cuisine_type",
    "dish_type",
    "price_range",
    "atmosphere",
    "dietary_restrictions",
    "wait_times",
    "type_of_meal",
    "others",
)

DEFAULT_MANDATORY = ("location", "cuisine_type")

OTHERS_SUBKEY = "others"
REMOVE_PREFIX = "remove:"

VERDICT_ACCEPT = "accept"
VERDICT_REJECT = "reject"


class StateError(ValueError):
    """Invalid state operation or malformed state payload."""


@dataclass(frozen=True)
class StateSchema:
    """Constraint subkey vocabulary plus which subkeys are mandatory."""

    constraint_subkeys: tuple[str, ...] = DEFAULT_SUBKEYS
    mandatory_subkeys: tuple[str, ...] = DEFAULT_MANDATORY

    def __post_init__(self):
        if len(set(self.constraint_subkeys)) != len(self.constraint_subkeys):
            raise StateError("constraint_subkeys contains duplicates")
        if OTHERS_SUBKEY not in self.constraint_subkeys:
            raise StateError(f"constraint_subkeys must include {OTHERS_SUBKEY!r}")
        unknown = [s for s in self.mandatory_subkeys if s not in self.constraint_subkeys]
        if unknown:
            raise StateError(f"mandatory subkeys not in constraint_subkeys: {unknown}")


def _frozen_map(values: Mapping[str, Sequence[str]]) -> Mapping[str, tuple[str, ...]]:
    return MappingProxyType({k: tuple(v) for k, v in values.items()})


_EMPTY_MAP: Mapping[str, tuple[str, ...]] = MappingProxyType({})


@dataclass(frozen=True)
class DialogueState:
    """One immutable snapshot of the conversation's tracked facts.

    Build through new_state / deserialize and evolve through the module's
    operations; the constructor performs no validation.
    """

    hard_constraints: Mapping[str, tuple[str, ...]] = _EMPTY_MAP
    soft_constraints: Mapping[str, tuple[str, ...]] = _EMPTY_MAP
    recommended_items: tuple[str, ...] = ()
    rejected_items: tuple[str, ...] = ()
    accepted_items: tuple[str, ...] = ()


def new_state(schema: StateSchema | None = None) -> DialogueState:
    """Fresh state: empty constraint maps, empty item lists."""
    return DialogueState()


def _check_value_list(side: str, subkey: str, values) -> None:
    if not isinstance(values, (list, tuple)):
        raise StateError(f"{side}.{subkey} must be a list of strings, got {type(values).__name__}")
    seen = set()
    for value in values:
        if not isinstance(value, str) or not value.strip():
            raise StateError(f"{side}.{subkey} contains a non-string or empty value: {value!r}")
        if value in seen:
            raise StateError(f"{side}.{subkey} contains duplicate value {value!r}")
        seen.add(value)


def check_invariants(state: DialogueState, schema: StateSchema) -> None:
    """Raise StateError unless every structural invariant holds."""
    known = set(schema.constraint_subkeys)
    for side_name, side in (
        ("hard_constraints", state.hard_constraints),
        ("soft_constraints", state.soft_constraints),
    ):
        for subkey, values in side.items():
            if subkey not in known:
                raise StateError(f"{side_name} has unknown subkey {subkey!r}")
            _check_value_list(side_name, subkey, values)
    for list_name, ids in (
        ("recommended_items", state.recommended_items),
        ("rejected_items", state.rejected_items),
        ("accepted_items", state.accepted_items),
    ):
        if len(set(ids)) != len(ids):
            raise StateError(f"{list_name} contains duplicates")
        for item_id in ids:
            if not isinstance(item_id, str) or not item_id:
                raise StateError(f"{list_name} contains a non-string or empty id: {item_id!r}")
    recommended = set(state.recommended_items)
    if not set(state.rejected_items) <= recommended:
        raise StateError("rejected_items must be a subset of recommended_items")
    if not set(state.accepted_items) <= recommended:
        raise StateError("accepted_items must be a subset of recommended_items")
    overlap = set(state.rejected_items) & set(state.accepted_items)
    if overlap:
        raise StateError(f"items cannot be both accepted and rejected: {sorted(overlap)}")


def _canonical_side(schema: StateSchema, side: Mapping[str, Sequence[str]]) -> Mapping[str, tuple[str, ...]]:
    """Reorder a constraint map to schema subkey order and drop empty subkeys."""
    unknown = [subkey for subkey in side if subkey not in schema.constraint_subkeys]
    if unknown:
        raise StateError(f"constraint map has unknown subkeys: {unknown}")
    ordered = {
        subkey: tuple(side[subkey])
        for subkey in schema.constraint_subkeys
        if subkey in side and side[subkey]
    }
    return MappingProxyType(ordered)


def _merge_side(
    schema: StateSchema,
    side_name: str,
    existing: Mapping[str, tuple[str, ...]],
    proposed: Mapping,
) -> Mapping[str, tuple[str, ...]]:
    if not isinstance(proposed, Mapping):
        raise StateError(f"proposed {side_name} must be a map, got {type(proposed).__name__}")
    known = set(schema.constraint_subkeys)
    # Normalize the proposal: unknown subkeys become "others" entries with the
    # subkey folded into the value text; removal markers keep their prefix.
    staged: list[tuple[str, str]] = []  # (subkey, value-or-remove-directive)
    for subkey, values in proposed.items():
        if not isinstance(subkey, str) or not subkey.strip():
            raise StateError(f"proposed {side_name} has a non-string subkey: {subkey!r}")
        if isinstance(values, str):
            values = [values]
        if not isinstance(values, (list, tuple)):
            raise StateError(
                f"proposed {side_name}.{subkey} must be a string or list of strings,"
                f" got {type(values).__name__}"
            )
        for value in values:
            if not isinstance(value, str):
                raise StateError(f"proposed {side_name}.{subkey} has a non-string value: {value!r}")
            removing = value.startswith(REMOVE_PREFIX)
            payload = value[len(REMOVE_PREFIX) :].strip() if removing else value.strip()
            if not payload:
                raise StateError(f"proposed {side_name}.{subkey} has an empty value: {value!r}")
            if subkey not in known:
                payload = f"{subkey}: {payload}"
                target = OTHERS_SUBKEY
            else:
                target = subkey
            staged.append((target, REMOVE_PREFIX + payload if removing else payload))

    merged = {subkey: list(values) for subkey, values in existing.items()}
    for subkey, directive in staged:
        current = merged.setdefault(subkey, [])
        if directive.startswith(REMOVE_PREFIX):
            target_value = directive[len(REMOVE_PREFIX) :]
            if target_value in current:
                current.remove(target_value)
        elif directive not in current:
            current.append(directive)
    return _canonical_side(schema, merged)


def apply_constraint_update(state: DialogueState, schema: StateSchema, proposed: Mapping) -> DialogueState:
    """Merge a proposed {hard: map, soft: map} update into the constraint maps.

    Known subkeys append new values (order kept, duplicates dropped); unknown
    subkeys fold into "others" as "<subkey>: <value>"; values prefixed
    "remove:" delete the matching stored value instead.
    """
    if not isinstance(proposed, Mapping):
        raise StateError(f"proposed update must be a map, got {type(proposed).__name__}")
    unknown_sides = set(proposed) - {"hard", "soft"}
    if unknown_sides:
        raise StateError(f"proposed update has unknown sections: {sorted(unknown_sides)}")
    hard = _merge_side(schema, "hard", state.hard_constraints, proposed.get("hard", {}))
    soft = _merge_side(schema, "soft", state.soft_constraints, proposed.get("soft", {}))
    return DialogueState(
        hard_constraints=hard,
        soft_constraints=soft,
        recommended_items=state.recommended_items,
        rejected_items=state.rejected_items,
        accepted_items=state.accepted_items,
    )


def record_recommendation(state: DialogueState, item_ids: Iterable[str]) -> DialogueState:
    """Append newly recommended item ids, keeping order and dropping repeats."""
    ids = list(item_ids)
    if not ids:
        raise StateError("record_recommendation requires at least one item id")
    combined = list(state.recommended_items)
    for item_id in ids:
        if not isinstance(item_id, str) or not item_id:
            raise StateError(f"item ids must be non-empty strings, got {item_id!r}")
        if item_id not in combined:
            combined.append(item_id)
    return DialogueState(
        hard_constraints=state.hard_constraints,
        soft_constraints=state.soft_constraints,
        recommended_items=tuple(combined),
        rejected_items=state.rejected_items,
        accepted_items=state.accepted_items,
    )


def record_verdict(state: DialogueState, item_id: str, verdict: str) -> DialogueState:
    """Mark a previously recommended item as accepted or rejected."""
    if verdict not in (VERDICT_ACCEPT, VERDICT_REJECT):
        raise StateError(f"verdict must be {VERDICT_ACCEPT!r} or {VERDICT_REJECT!r}, got {verdict!r}")
    if item_id not in state.recommended_items:
        raise StateError(f"cannot record a verdict for {item_id!r}: never recommended")
    opposite = state.accepted_items if verdict == VERDICT_REJECT else state.rejected_items
    if item_id in opposite:
        raise StateError(f"{item_id!r} already carries the opposite verdict")
    target = state.rejected_items if verdict == VERDICT_REJECT else state.accepted_items
    if item_id in target:
        return state
    updated = target + (item_id,)
    return DialogueState(
        hard_constraints=state.hard_constraints,
        soft_constraints=state.soft_constraints,
        recommended_items=state.recommended_items,
        rejected_items=updated if verdict == VERDICT_REJECT else state.rejected_items,
        accepted_items=updated if verdict == VERDICT_ACCEPT else state.accepted_items,
    )


def missing_mandatory(state: DialogueState, schema: StateSchema) -> list[str]:
    """Mandatory subkeys with no hard-constraint values, in schema order."""
    return [
        subkey
        for subkey in schema.constraint_subkeys
        if subkey in schema.mandatory_subkeys and not state.hard_constraints.get(subkey)
    ]


def to_json_dict(state: DialogueState) -> dict:
    """Plain-JSON view with the five top-level keys in wire order."""
    return {
        "hard_constraints": {k: list(v) for k, v in state.hard_constraints.items()},
        "soft_constraints": {k: list(v) for k, v in state.soft_constraints.items()},
        "recommended_items": list(state.recommended_items),
        "rejected_items": list(state.rejected_items),
        "accepted_items": list(state.accepted_items),
    }


def serialize(state: DialogueState) -> str:
    return json.dumps(to_json_dict(state), ensure_ascii=False, indent=2)


def deserialize(schema: StateSchema, text: str) -> DialogueState:
    """Parse serialized state JSON, enforcing shape and every invariant."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateError(f"state payload is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise StateError(f"state payload must be a JSON object, got {type(raw).__name__}")
    missing = [key for key in STATE_KEYS if key not in raw]
    extra = [key for key in raw if key not in STATE_KEYS]
    if missing or extra:
        raise StateError(f"state payload keys wrong (missing {missing}, unexpected {extra})")
    for side_name in ("hard_constraints", "soft_constraints"):
        if not isinstance(raw[side_name], dict):
            raise StateError(f"{side_name} must be a JSON object")
    for list_name in ("recommended_items", "rejected_items", "accepted_items"):
        if not isinstance(raw[list_name], list):
            raise StateError(f"{list_name} must be a JSON array")
    state = DialogueState(
        hard_constraints=_canonical_side(schema, _coerce_side(raw["hard_constraints"])),
        soft_constraints=_canonical_side(schema, _coerce_side(raw["soft_constraints"])),
        recommended_items=tuple(raw["recommended_items"]),
        rejected_items=tuple(raw["rejected_items"]),
        accepted_items=tuple(raw["accepted_items"]),
    )
    check_invariants(state, schema)
    return state


def _coerce_side(side: dict) -> dict[str, list[str]]:
    coerced: dict[str, list[str]] = {}
    for subkey, values in side.items():
        if not isinstance(values, list):
            raise StateError(f"constraint subkey {subkey!r} must map to a JSON array")
        coerced[subkey] = values
    return coerced
