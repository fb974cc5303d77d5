/** Flatten a dialogue state into stable entry paths and diff two states.
 *
 * Paths look like "hard_constraints.location" (constraint subkey) or
 * "accepted_items.washoku_bistro" (list membership). A path is changed when
 * it is new or its value differs from the previous state; the panel uses the
 * changed set for highlighting.
 */

import type { DialogueStateJson } from "./types.js";

export function flattenState(state: DialogueStateJson): Map<string, string> {
  const entries = new Map<string, string>();
  for (const key of ["hard_constraints", "soft_constraints"] as const) {
    for (const [subkey, values] of Object.entries(state[key])) {
      entries.set(`${key}.${subkey}`, JSON.stringify(values));
    }
  }
  for (const key of ["recommended_items", "rejected_items", "accepted_items"] as const) {
    for (const itemId of state[key]) {
      entries.set(`${key}.${itemId}`, "present");
    }
  }
  return entries;
}

export function changedPaths(
  previous: DialogueStateJson | null,
  next: DialogueStateJson,
): Set<string> {
  const before = previous === null ? new Map<string, string>() : flattenState(previous);
  const after = flattenState(next);
  const changed = new Set<string>();
  for (const [path, value] of after) {
    if (before.get(path) !== value) {
      changed.add(path);
    }
  }
  return changed;
}
